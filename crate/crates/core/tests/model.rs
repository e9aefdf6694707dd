//! Loss bookkeeping, training determinism and forecasts on small windows.

use fracseir::data::TrainingData;
use fracseir::fractional::build_weights;
use fracseir::model::{
    fit, loss_report, mse_r, mse_u, residual_at, LossContext, LossWeights, ModelInit,
    SeirConstants, SeirModel, TrainingConfig, TrainingMesh, TrainingWindow,
};
use fracseir::solver::{forecast, Band, SolverError};
use fracseir::synthetic::SyntheticRegime;

fn small_config() -> TrainingConfig {
    let mut cfg = TrainingConfig::new(1e6);
    cfg.tau = 0.5;
    cfg.iterations = 30;
    cfg.record_every = 10;
    cfg
}

fn small_data() -> TrainingData {
    SyntheticRegime::reference().training_data(6).unwrap()
}

fn untrained(n_data: usize, tau: f64) -> SeirModel {
    let window = TrainingWindow {
        n_data,
        tau,
        start_date: None,
    };
    let init = ModelInit {
        state_scale: 5e-3,
        ..ModelInit::default()
    };
    SeirModel::new(SeirConstants::new(1e6, 1.0 / 3.0).unwrap(), window, init).unwrap()
}

#[test]
fn loss_terms_add_up() {
    let data = small_data();
    let model = untrained(6, 0.5);
    let mesh = TrainingMesh::new(6, 0.5).unwrap();
    let table = build_weights(mesh.grid(), model.table_alpha()).unwrap();
    let unit = LossWeights::default();
    let ctx = LossContext {
        mesh: &mesh,
        data: &data,
        table: &table,
        sensitivity: None,
        weights: &unit,
    };
    let report = loss_report(&model, &ctx).unwrap();
    assert_eq!(report.total, report.mse_u + report.mse_r);
    assert!(report.data_terms.iter().chain(&report.residual_terms).all(|t| *t >= 0.0));

    let direct_r = mse_r(&model, &table, &mesh).unwrap();
    let summed: f64 = (1..=mesh.last_index())
        .map(|k| residual_at(&model, &table, k).unwrap().iter().map(|r| r * r).sum::<f64>())
        .sum();
    assert!((report.mse_r - direct_r).abs() <= 1e-14 * direct_r);
    assert!((summed - direct_r).abs() <= 1e-12 * direct_r);
    let direct_u = mse_u(&model, &data, &mesh).unwrap();
    assert!((report.mse_u - direct_u).abs() <= 1e-12 * direct_u);

    let doubled = LossWeights {
        residual: [2.0; 5],
        ..unit
    };
    let twice = loss_report(&model, &LossContext { weights: &doubled, ..ctx }).unwrap();
    assert!((twice.mse_r - 2.0 * report.mse_r).abs() <= 1e-14 * report.mse_r);
    assert_eq!(twice.mse_u, report.mse_u);
}

#[test]
fn training_is_deterministic() {
    let data = small_data();
    let a = fit(&data, &small_config()).unwrap();
    let b = fit(&data, &small_config()).unwrap();
    assert_eq!(a.model.params(), b.model.params());
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.iterations_trained(), 30);
    assert_eq!(a.history.iter().map(|r| r.iteration).collect::<Vec<_>>(), [0, 10, 20, 30]);

    let mut other = small_config();
    other.seed = 9;
    assert_ne!(fit(&data, &other).unwrap().model.params(), a.model.params());
}

#[test]
fn training_lowers_the_loss() {
    let mut cfg = small_config();
    cfg.iterations = 300;
    let outcome = fit(&small_data(), &cfg).unwrap();
    assert!(outcome.final_loss() < 0.5 * outcome.initial_loss());
}

#[test]
fn empty_epidemic_is_fitted_immediately() {
    let zeros = vec![0.0; 10];
    let data = TrainingData {
        population: 1e6,
        start_date: None,
        days: (1..=10).map(|d| d as f64).collect(),
        new_infected: zeros.clone(),
        cum_infected: zeros.clone(),
        new_removed: zeros.clone(),
        removed: zeros.clone(),
        current_infected: zeros,
    };
    let mut cfg = small_config();
    cfg.iterations = 20;
    let outcome = fit(&data, &cfg).unwrap();
    assert!(outcome.history.last().unwrap().report.mse_u < 1e-8);
}

#[test]
fn population_mismatch_is_rejected() {
    let mut cfg = small_config();
    cfg.population = 2e6;
    assert!(fit(&small_data(), &cfg).is_err());
}

#[test]
fn forecast_needs_a_trained_model() {
    let err = forecast(&untrained(6, 0.5), &small_data(), 7, 0.3).unwrap_err();
    assert_eq!(err, SolverError::Untrained);
}

#[test]
fn forecast_bands_have_the_requested_shape_and_order() {
    let data = small_data();
    let model = fit(&data, &small_config()).unwrap().model;
    let bundle = forecast(&model, &data, 7, 0.3).unwrap();
    assert_eq!(bundle.horizon(), 7);
    for band in Band::ALL {
        assert_eq!(bundle.band(band).len(), 8);
        assert_eq!(bundle.band_daily_new(band).len(), 7);
    }
    let days = |b: Band| bundle.band(b).column(|s| s.t);
    assert_eq!(days(Band::Central), days(Band::Upper));
    assert_eq!(days(Band::Central), days(Band::Lower));
    for d in 1..=7 {
        let i = |b: Band| bundle.band(b).states[d].i;
        assert!(i(Band::Upper) >= i(Band::Central) && i(Band::Central) >= i(Band::Lower));
    }
    // The last training day is shared by every band.
    assert_eq!(bundle.upper.states[0], bundle.lower.states[0]);
    assert!((bundle.central.states[0].i - data.current_infected[5] * 1e6).abs() < 1e-6);

    assert_eq!(forecast(&model, &data, 0, 0.3).unwrap_err(), SolverError::Horizon);
}

#[test]
fn zero_uncertainty_collapses_the_bands() {
    let data = small_data();
    let model = fit(&data, &small_config()).unwrap().model;
    let bundle = forecast(&model, &data, 5, 0.0).unwrap();
    assert_eq!(bundle.central, bundle.upper);
    assert_eq!(bundle.central, bundle.lower);
    assert_eq!(bundle.uncertainty, 0.0);
    assert_eq!(forecast(&model, &data, 5, 0.0).unwrap(), bundle);
}
