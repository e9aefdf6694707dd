//! `fracseir` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "fracseir", version, about = "Fractional SEIR calibration and forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Measure the quadrature's convergence order for α = 0.25, 0.5, 0.75.
    Validate,
    /// Fit the model to a case series.
    Fit {
        /// Case-count CSV (date,new_infected,new_recovered,new_dead).
        #[arg(long)]
        data: PathBuf,
        /// Training configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report the inferred S, E, β, μ and α of a fitted model.
    Infer {
        /// Model file written by `fit`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forecast past the training window with β uncertainty bands.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        /// The case-count CSV the model was fitted on.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Days to forecast.
        #[arg(long, default_value_t = 7)]
        horizon: usize,
        /// Relative spread on the frozen β.
        #[arg(long, default_value_t = fracseir::solver::DEFAULT_UNCERTAINTY)]
        uncertainty: f64,
    },
    /// Run validate, fit, infer and forecast on the bundled synthetic data set.
    Demo {
        #[arg(long)]
        out: PathBuf,
        /// Training configuration JSON; defaults to the bundled one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 7)]
        horizon: usize,
        #[arg(long, default_value_t = fracseir::solver::DEFAULT_UNCERTAINTY)]
        uncertainty: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate => commands::validate(),
        Command::Fit {
            data,
            config,
            out,
            seed,
        } => commands::fit(&data, &config, &out, seed).map(|_| ()),
        Command::Infer { model, out } => commands::infer(&model, &out),
        Command::Forecast {
            model,
            data,
            out,
            horizon,
            uncertainty,
        } => commands::forecast(&model, &data, &out, horizon, uncertainty),
        Command::Demo {
            out,
            config,
            seed,
            horizon,
            uncertainty,
        } => commands::demo(&out, config.as_deref(), seed, horizon, uncertainty),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
