//! Fits the reference synthetic outbreak and prints the recovered parameters.
//!
//! ```text
//! cargo run --release -p fracseir --example fit_synthetic -- [iterations]
//! ```

use fracseir::model::{fit_with_progress, TrainingConfig};
use fracseir::solver::{forecast, DEFAULT_UNCERTAINTY};
use fracseir::synthetic::SyntheticRegime;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(20_000);
    let regime = SyntheticRegime::reference();
    let data = regime.training_data(30)?;
    let mut config = TrainingConfig::new(regime.constants.population);
    config.iterations = iterations;
    config.record_every = 1000;
    let start = std::time::Instant::now();
    let outcome = fit_with_progress(&data, &config, |r| {
        println!(
            "{:>6}  loss {:.3e}  data {:.3e}  residual {:.3e}  alpha {:.4}",
            r.iteration, r.report.total, r.report.mse_u, r.report.mse_r, r.alpha
        );
    })?;
    let m = &outcome.model;
    for day in [5.0, 10.0, 15.0, 20.0, 25.0] {
        println!("day {day:>4}: beta {:.4}  mu {:.4}", m.beta(day), m.mu(day));
    }
    println!(
        "alpha {:.4}  loss ratio {:.3e}  elapsed {:.1?}",
        m.alpha(),
        outcome.final_loss() / outcome.initial_loss(),
        start.elapsed()
    );
    let bundle = forecast(m, &data, 7, DEFAULT_UNCERTAINTY)?;
    let truth = regime.trajectory(37)?;
    for d in 0..=7 {
        println!(
            "day {:>2}: I truth {:>8.1}  lower {:>8.1}  central {:>8.1}  upper {:>8.1}",
            30 + d,
            truth.states[29 + d].i,
            bundle.lower.states[d].i,
            bundle.central.states[d].i,
            bundle.upper.states[d].i
        );
    }
    let path = std::env::temp_dir().join("fit_synthetic_model.json");
    m.save(&path)?;
    println!("saved {}", path.display());
    Ok(())
}
