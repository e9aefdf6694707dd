use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fracseir::data::{
    ingest, ingest_reader, seven_day_average, to_training_arrays, CaseSeries, DataError,
    TrainingData,
};
use fracseir::fractional::{measured_order, LogPower};
use fracseir::model::{
    fit_with_progress, Compartment, FitOutcome, ModelFile, ModelIoError, SeirModel,
    TrainingConfig, TrainingError,
};
use fracseir::solver::{forecast as run_forecast, Band, ForecastBundle, SolverError};
use thiserror::Error;

use crate::svg::{render, Panel, Series, Style};

/// Bundled synthetic case series used by `demo`.
pub const DEMO_DATA: &str = include_str!("../../../data/synthetic_cases.csv");
/// Training configuration used by `demo` unless one is given.
pub const DEMO_CONFIG: &str = include_str!("../../../data/demo_config.json");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelIoError> for CliError {
    fn from(e: ModelIoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::Config(_) | TrainingError::Population { .. } | TrainingError::Mesh(_) => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Numerical(format!("training aborted: {e}")),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Horizon | SolverError::Uncertainty(_) => CliError::Usage(e.to_string()),
            SolverError::Untrained | SolverError::WindowMismatch { .. } => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Numerical(format!("forecast failed: {e}")),
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn prepare_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))
}

fn read_config(path: &Path) -> Result<TrainingConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
    Ok(TrainingConfig::from_json(&text)?)
}

fn load_model(path: &Path) -> Result<SeirModel, CliError> {
    SeirModel::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn training_data(series: &CaseSeries, population: f64) -> Result<TrainingData, CliError> {
    Ok(to_training_arrays(&seven_day_average(series)?, population)?)
}

/// `validate`: convergence order of the quadrature on `(log t)^3`.
pub fn validate() -> Result<(), CliError> {
    let mut failed = 0;
    for alpha in [0.25, 0.5, 0.75] {
        let study = measured_order(alpha, &LogPower(3.0), 4)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let expected = 3.0 - alpha;
        let order = study.order();
        let ok = order >= expected - 0.2;
        failed += usize::from(!ok);
        println!(
            "alpha {alpha:.2}: observed order {order:.4}, expected {expected:.2} (threshold {:.2}) {}",
            expected - 0.2,
            if ok { "ok" } else { "FAIL" }
        );
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} convergence checks failed")));
    }
    Ok(())
}

fn loss_history_csv(outcome: &FitOutcome) -> String {
    let mut s = String::from(
        "iteration,alpha,total,mse_u,mse_r,data_I_new,data_I_cum,data_R_new,data_R,data_I,\
         residual_S,residual_E,residual_I,residual_R,residual_I_cum\n",
    );
    for r in &outcome.history {
        let rep = &r.report;
        let _ = write!(s, "{},{},{},{},{}", r.iteration, r.alpha, rep.total, rep.mse_u, rep.mse_r);
        for v in rep.data_terms.iter().chain(&rep.residual_terms) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Observed and fitted values of the five data series, in persons.
struct FitSeries {
    names: [&'static str; 5],
    observed: [Vec<(f64, f64)>; 5],
    fitted: [Vec<(f64, f64)>; 5],
}

fn fit_series(model: &SeirModel, data: &TrainingData) -> FitSeries {
    let n = data.population;
    let days: Vec<f64> = data.days.clone();
    let at = |c: Compartment, t: f64| model.compartment(c, t);
    let obs = |xs: &[f64], from: usize| -> Vec<(f64, f64)> {
        days.iter().zip(xs).skip(from).map(|(d, v)| (*d, v * n)).collect()
    };
    let fitted = |f: &dyn Fn(f64) -> f64, from: usize| -> Vec<(f64, f64)> {
        days.iter().skip(from).map(|d| (*d, f(*d))).collect()
    };
    use Compartment::*;
    FitSeries {
        names: ["I_new", "I_cum", "R_new", "R", "I"],
        observed: [
            obs(&data.new_infected, 1),
            obs(&data.cum_infected, 0),
            obs(&data.new_removed, 1),
            obs(&data.removed, 0),
            obs(&data.current_infected, 0),
        ],
        fitted: [
            fitted(&|t| at(CumulativeInfected, t) - at(CumulativeInfected, t - 1.0), 1),
            fitted(&|t| at(CumulativeInfected, t), 0),
            fitted(&|t| at(Removed, t) - at(Removed, t - 1.0), 1),
            fitted(&|t| at(Removed, t), 0),
            fitted(&|t| at(Infected, t), 0),
        ],
    }
}

fn fit_csv(series: &FitSeries, data: &TrainingData) -> String {
    let mut s = String::from("day,date");
    for name in series.names {
        let _ = write!(s, ",{name}_observed,{name}_fitted");
    }
    s.push('\n');
    for (d, day) in data.days.iter().enumerate() {
        let date = data.date_of(d + 1).map(|x| x.to_string()).unwrap_or_default();
        let _ = write!(s, "{day},{date}");
        for c in 0..5 {
            let find = |xs: &[(f64, f64)]| {
                xs.iter()
                    .find(|p| p.0 == *day)
                    .map(|p| p.1.to_string())
                    .unwrap_or_default()
            };
            let _ = write!(s, ",{},{}", find(&series.observed[c]), find(&series.fitted[c]));
        }
        s.push('\n');
    }
    s
}

fn fit_svg(series: &FitSeries) -> String {
    let panels: Vec<Panel> = (0..5)
        .map(|c| {
            Panel::new(format!("{} (persons)", series.names[c]), "day")
                .with(Series::new("observed", series.observed[c].clone(), Style::Markers, "#d62728"))
                .with(Series::new("fitted", series.fitted[c].clone(), Style::Line, "#1f77b4"))
        })
        .collect();
    render(&panels, 3)
}

fn fit_data(
    data: TrainingData,
    config: TrainingConfig,
    out: &Path,
) -> Result<FitOutcome, CliError> {
    prepare_dir(out)?;
    let step = (config.iterations / 20).max(1);
    let outcome = fit_with_progress(&data, &config, |r| {
        if r.iteration % step == 0 || r.iteration == config.iterations {
            eprintln!(
                "iteration {:>7}  loss {:.4e}  alpha {:.4}",
                r.iteration, r.report.total, r.alpha
            );
        }
    })?;
    let model_path = out.join("model.json");
    write(&model_path, &ModelFile::from(&outcome.model).to_json())?;
    write(&out.join("loss_history.csv"), &loss_history_csv(&outcome))?;
    let series = fit_series(&outcome.model, &data);
    write(&out.join("fit.csv"), &fit_csv(&series, &data))?;
    write(&out.join("fit.svg"), &fit_svg(&series))?;
    println!(
        "alpha {}  loss {:.4e} -> {:.4e}",
        outcome.model.alpha(),
        outcome.initial_loss(),
        outcome.final_loss()
    );
    Ok(outcome)
}

/// `fit`: ingest, precondition and fit; writes the model and diagnostics.
pub fn fit(data: &Path, config: &Path, out: &Path, seed: Option<u64>) -> Result<FitOutcome, CliError> {
    let mut config = read_config(config)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let series = ingest(data)?;
    let training = training_data(&series, config.population)?;
    fit_data(training, config, out)
}

fn inference_csv(model: &SeirModel) -> String {
    let mut s = String::from("day,S,E,beta,mu\n");
    for day in 1..=model.window().n_data {
        let t = day as f64;
        let _ = writeln!(
            s,
            "{day},{},{},{},{}",
            model.compartment(Compartment::Susceptible, t),
            model.compartment(Compartment::Exposed, t),
            model.beta(t),
            model.mu(t)
        );
    }
    s
}

fn inference_svg(model: &SeirModel) -> String {
    let n = model.window().n_data as f64;
    let ts: Vec<f64> = (0..=((n - 1.0) * 10.0) as usize).map(|i| 1.0 + 0.1 * i as f64).collect();
    let curve = |f: &dyn Fn(f64) -> f64| ts.iter().map(|t| (*t, f(*t))).collect::<Vec<_>>();
    let panels = [
        ("S (persons)", curve(&|t| model.compartment(Compartment::Susceptible, t))),
        ("E (persons)", curve(&|t| model.compartment(Compartment::Exposed, t))),
        ("beta (per day)", curve(&|t| model.beta(t))),
        ("mu (per day)", curve(&|t| model.mu(t))),
    ]
    .into_iter()
    .map(|(title, pts)| {
        Panel::new(title, "day").with(Series::new("inferred", pts, Style::Line, "#1f77b4"))
    })
    .collect::<Vec<_>>();
    render(&panels, 2)
}

/// `infer`: S, E, β, μ over the training window and the fitted order.
pub fn infer(model: &Path, out: &Path) -> Result<(), CliError> {
    let m = load_model(model)?;
    prepare_dir(out)?;
    write(&out.join("inference.csv"), &inference_csv(&m))?;
    write(&out.join("inference.svg"), &inference_svg(&m))?;
    let alpha = serde_json::json!({ "alpha": m.alpha(), "raw_alpha": m.raw_alpha() });
    let text = serde_json::to_string_pretty(&alpha).expect("plain JSON") + "\n";
    write(&out.join("alpha.json"), &text)?;
    println!("alpha {}", m.alpha());
    Ok(())
}

fn forecast_csv(bundle: &ForecastBundle, data: &TrainingData) -> String {
    let mut s = String::from("day,date,band,S,E,I,R,I_cum,I_new\n");
    let last = data.len();
    for band in Band::ALL {
        let traj = bundle.band(band);
        let new = bundle.band_daily_new(band);
        for d in 1..traj.len() {
            let st = &traj.states[d];
            let day = last + d;
            let date = data.date_of(day).map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{day},{date},{},{},{},{},{},{},{}",
                band.label(),
                st.s,
                st.e,
                st.i,
                st.r,
                st.i_cum,
                new[d - 1]
            );
        }
    }
    s
}

fn forecast_svg(bundle: &ForecastBundle, data: &TrainingData) -> String {
    let n = data.population;
    let last = data.len() as f64;
    let observed: Vec<(f64, f64)> = data
        .days
        .iter()
        .zip(&data.new_infected)
        .skip(1)
        .map(|(d, v)| (*d, v * n))
        .collect();
    let band = |b: Band| -> Vec<(f64, f64)> {
        bundle
            .band_daily_new(b)
            .iter()
            .enumerate()
            .map(|(i, v)| (last + 1.0 + i as f64, *v))
            .collect()
    };
    let title = format!(
        "daily new infected, alpha = {:.3}, beta = {:.3e}, mu = {:.3e}",
        bundle.alpha, bundle.beta, bundle.mu
    );
    let upper = format!("{:.0}% beta", 100.0 * Band::Upper.factor(bundle.uncertainty));
    let lower = format!("{:.0}% beta", 100.0 * Band::Lower.factor(bundle.uncertainty));
    let panel = Panel::new(title, "day")
        .with(Series::new("observed", observed, Style::Markers, "#d62728"))
        .with(Series::new("central", band(Band::Central), Style::Line, "#1f77b4"))
        .with(Series::new(upper, band(Band::Upper), Style::Dashed, "#2ca02c"))
        .with(Series::new(lower, band(Band::Lower), Style::Dashed, "#9467bd"));
    render(&[panel], 1)
}

fn forecast_data(
    model: &SeirModel,
    data: &TrainingData,
    out: &Path,
    horizon: usize,
    uncertainty: f64,
) -> Result<(), CliError> {
    if horizon == 0 {
        return Err(CliError::Usage("--horizon must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&uncertainty) {
        return Err(CliError::Usage(format!("--uncertainty must lie in [0, 1), got {uncertainty}")));
    }
    prepare_dir(out)?;
    let bundle = run_forecast(model, data, horizon, uncertainty)?;
    write(&out.join("forecast.csv"), &forecast_csv(&bundle, data))?;
    write(&out.join("forecast.svg"), &forecast_svg(&bundle, data))?;
    Ok(())
}

/// `forecast`: three β bands past the training window.
pub fn forecast(
    model: &Path,
    data: &Path,
    out: &Path,
    horizon: usize,
    uncertainty: f64,
) -> Result<(), CliError> {
    let m = load_model(model)?;
    let series = ingest(data)?;
    let training = training_data(&series, m.constants().population)?;
    forecast_data(&m, &training, out, horizon, uncertainty)
}

/// `demo`: the whole pipeline on the bundled synthetic data set.
pub fn demo(
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    horizon: usize,
    uncertainty: f64,
) -> Result<(), CliError> {
    validate()?;
    let mut cfg = match config {
        Some(path) => read_config(path)?,
        None => TrainingConfig::from_json(DEMO_CONFIG)?,
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    prepare_dir(out)?;
    let data_path: PathBuf = out.join("synthetic_cases.csv");
    write(&data_path, DEMO_DATA)?;
    let series = ingest_reader(DEMO_DATA.as_bytes())?;
    let training = training_data(&series, cfg.population)?;
    let outcome = fit_data(training.clone(), cfg, out)?;
    infer(&out.join("model.json"), out)?;
    forecast_data(&outcome.model, &training, out, horizon, uncertainty)
}
