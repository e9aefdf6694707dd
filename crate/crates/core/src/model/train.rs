use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::loss::{loss_and_gradient, LossContext, LossError, LossReport, LossWeights};
use super::{
    ModelError, ModelInit, SeirConstants, SeirModel, TrainingMesh, TrainingWindow,
    DEFAULT_ALPHA_BOUNDS, DEFAULT_INITIAL_ALPHA, DEFAULT_SEED, DEFAULT_SIGMA,
};
use crate::data::TrainingData;
use crate::fractional::{build_weights, weight_sensitivity, QuadratureError, QuadratureTable, WeightRows};
use crate::nn::{AdamConfig, OptimizerState};
use crate::solver::SolverError;

/// Training configuration, read from JSON.
///
/// Only `population` is required; every other field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub population: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub loss_weights: LossWeights,
    #[serde(default = "default_alpha_bounds")]
    pub alpha_bounds: (f64, f64),
    #[serde(default = "default_initial_alpha")]
    pub initial_alpha: f64,
    #[serde(default = "default_rebuild_threshold")]
    pub alpha_rebuild_threshold: f64,
    /// Step of the central difference in `α` used for the order's gradient.
    #[serde(default = "default_alpha_step")]
    pub alpha_difference_step: f64,
    /// Loss history is recorded every this many iterations.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}
fn default_tau() -> f64 {
    0.1
}
fn default_iterations() -> usize {
    50_000
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_alpha_bounds() -> (f64, f64) {
    DEFAULT_ALPHA_BOUNDS
}
fn default_initial_alpha() -> f64 {
    DEFAULT_INITIAL_ALPHA
}
fn default_rebuild_threshold() -> f64 {
    1e-4
}
fn default_alpha_step() -> f64 {
    1e-4
}
fn default_record_every() -> usize {
    100
}

impl TrainingConfig {
    pub fn new(population: f64) -> Self {
        Self {
            population,
            sigma: default_sigma(),
            tau: default_tau(),
            iterations: default_iterations(),
            learning_rate: default_learning_rate(),
            seed: default_seed(),
            loss_weights: LossWeights::default(),
            alpha_bounds: default_alpha_bounds(),
            initial_alpha: default_initial_alpha(),
            alpha_rebuild_threshold: default_rebuild_threshold(),
            alpha_difference_step: default_alpha_step(),
            record_every: default_record_every(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, TrainingError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| TrainingError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: String| Err(TrainingError::Config(m));
        if !(self.population > 0.0 && self.population.is_finite()) {
            return bad(format!("population must be positive, got {}", self.population));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if self.alpha_rebuild_threshold.is_nan() || self.alpha_rebuild_threshold < 0.0 {
            return bad("alpha_rebuild_threshold must be non-negative".into());
        }
        if !(self.alpha_difference_step > 0.0 && self.alpha_difference_step < 0.01) {
            return bad("alpha_difference_step must lie in (0, 0.01)".into());
        }
        if self
            .loss_weights
            .data
            .iter()
            .chain(&self.loss_weights.residual)
            .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return bad("loss weights must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn constants(&self) -> Result<SeirConstants, ModelError> {
        SeirConstants::new(self.population, self.sigma)
    }

    pub fn model_init(&self) -> ModelInit {
        ModelInit {
            seed: self.seed,
            alpha_bounds: self.alpha_bounds,
            initial_alpha: self.initial_alpha,
            ..ModelInit::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainingError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training data population {data} differs from config population {config}")]
    Population { data: f64, config: f64 },
    #[error("non-finite loss at iteration {iteration} in term {term}")]
    NonFinite { iteration: usize, term: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Mesh(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub alpha: f64,
    pub report: LossReport,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: SeirModel,
    pub history: Vec<LossRecord>,
}

impl FitOutcome {
    pub fn initial_loss(&self) -> f64 {
        self.history.first().map_or(f64::NAN, |r| r.report.total)
    }

    pub fn final_loss(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.report.total)
    }
}

/// Quadrature data kept in step with the model's order.
struct Tables {
    table: QuadratureTable,
    sensitivity: WeightRows,
}

impl Tables {
    fn build(mesh: &TrainingMesh, alpha: f64, step: f64) -> Result<Self, QuadratureError> {
        let table = build_weights(mesh.grid(), alpha)?;
        // Fall back to a narrower difference near the ends of (0, 1).
        let room = alpha.min(1.0 - alpha) * 0.5;
        let sensitivity = weight_sensitivity(mesh.grid(), alpha, step.min(room))?;
        Ok(Self { table, sensitivity })
    }
}

/// Output scale for the compartment networks: the largest observed
/// compartment, so the networks work with values of order one. An empty
/// epidemic gets a millionth of the population.
pub fn state_scale(data: &TrainingData) -> f64 {
    let peak = data
        .cum_infected
        .iter()
        .chain(&data.removed)
        .chain(&data.current_infected)
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    if peak > 0.0 && peak.is_finite() {
        peak
    } else {
        1e-6
    }
}

/// Full-batch Adam on `MSE_u + MSE_r` over every network parameter and the
/// raw order. Deterministic for a fixed config.
pub fn fit(data: &TrainingData, config: &TrainingConfig) -> Result<FitOutcome, TrainingError> {
    fit_with_progress(data, config, |_| {})
}

/// [`fit`] with a callback invoked on each recorded loss.
pub fn fit_with_progress(
    data: &TrainingData,
    config: &TrainingConfig,
    mut progress: impl FnMut(&LossRecord),
) -> Result<FitOutcome, TrainingError> {
    config.validate()?;
    if data.population != config.population {
        return Err(TrainingError::Population {
            data: data.population,
            config: config.population,
        });
    }
    let mesh = TrainingMesh::new(data.len(), config.tau)?;
    let window = TrainingWindow {
        n_data: data.len(),
        tau: config.tau,
        start_date: data.start_date,
    };
    let init = ModelInit {
        state_scale: state_scale(data),
        ..config.model_init()
    };
    let mut model = SeirModel::new(config.constants()?, window, init)?;
    let mut tables = Tables::build(&mesh, model.table_alpha(), config.alpha_difference_step)?;
    let mut optimizer = OptimizerState::new(
        model.param_count(),
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut history = Vec::new();
    let mut params = model.params();

    for iteration in 0..=config.iterations {
        let alpha = model.table_alpha();
        if (alpha - tables.table.alpha()).abs() > config.alpha_rebuild_threshold {
            tables = Tables::build(&mesh, alpha, config.alpha_difference_step)?;
        }
        let ctx = LossContext {
            mesh: &mesh,
            data,
            table: &tables.table,
            sensitivity: Some(&tables.sensitivity),
            weights: &config.loss_weights,
        };
        let (report, grad) = loss_and_gradient(&model, &ctx)?;
        if let Some(term) = report.non_finite_term() {
            return Err(TrainingError::NonFinite { iteration, term });
        }
        if iteration % config.record_every == 0 || iteration == config.iterations {
            let record = LossRecord {
                iteration,
                alpha: model.alpha(),
                report,
            };
            progress(&record);
            history.push(record);
        }
        if iteration == config.iterations {
            break;
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(TrainingError::NonFinite {
                iteration,
                term: format!("gradient[{i}]"),
            });
        }
        optimizer
            .step(&mut params, &grad)
            .map_err(ModelError::from)?;
        model.set_params(&params)?;
        model.iterations_trained += 1;
    }
    Ok(FitOutcome { model, history })
}
