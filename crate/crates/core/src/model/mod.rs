//! The trainable fractional SEIR model.
//!
//! Five compartment networks (`S, E, I, R, I^c`, emitting fractions of the
//! population), two rate networks (`β, μ`, passed through softplus so rates
//! stay positive) and one raw scalar decoding to the fractional order.

mod io;
mod loss;
mod mesh;
mod train;

pub use io::{ModelFile, ModelIoError, NetworkSet, MODEL_FORMAT, MODEL_SCHEMA_VERSION};
pub use loss::{
    ch_term_alpha_gradient, ch_term_gradient, loss_and_gradient, loss_report, mse_r, mse_u,
    residual_at, LossContext, LossError, LossReport, LossWeights, DATA_TERM_NAMES,
    RESIDUAL_TERM_NAMES,
};
pub use mesh::TrainingMesh;
pub use train::{fit, fit_with_progress, state_scale, FitOutcome, LossRecord, TrainingConfig, TrainingError};

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{
    bounded_scalar, bounded_scalar_inverse, bounded_scalar_slope, softplus, Activation, DenseNet,
    InputScaling, NnError, OutputScaling,
};

/// Hidden layout of the compartment networks: five layers of twenty.
pub const COMPARTMENT_LAYERS: [usize; 7] = [1, 20, 20, 20, 20, 20, 1];
/// Hidden layout of the rate networks: one layer of five.
pub const RATE_LAYERS: [usize; 3] = [1, 5, 1];
/// Incubation rate for a three-day mean incubation period.
pub const DEFAULT_SIGMA: f64 = 1.0 / 3.0;
pub const DEFAULT_ALPHA_BOUNDS: (f64, f64) = (0.05, 1.0);
pub const DEFAULT_INITIAL_ALPHA: f64 = 0.9;
pub const DEFAULT_SEED: u64 = 42;
/// Largest order handed to the quadrature; the decoded order can round to 1.
pub(crate) const MAX_TABLE_ALPHA: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("population must be positive, got {0}")]
    Population(f64),
    #[error("incubation rate must be positive, got {0}")]
    Sigma(f64),
    #[error("invalid order bounds ({0}, {1})")]
    AlphaBounds(f64, f64),
    #[error("initial order {0} outside its bounds")]
    InitialAlpha(f64),
    #[error("state scale must be positive, got {0}")]
    StateScale(f64),
    #[error(transparent)]
    Network(#[from] NnError),
}

/// Total population `N` and incubation rate `σ` (per day).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeirConstants {
    pub population: f64,
    pub sigma: f64,
}

impl SeirConstants {
    pub fn new(population: f64, sigma: f64) -> Result<Self, ModelError> {
        if !(population > 0.0 && population.is_finite()) {
            return Err(ModelError::Population(population));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ModelError::Sigma(sigma));
        }
        Ok(Self { population, sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compartment {
    Susceptible,
    Exposed,
    Infected,
    Removed,
    CumulativeInfected,
}

impl Compartment {
    pub const ALL: [Compartment; 5] = [
        Compartment::Susceptible,
        Compartment::Exposed,
        Compartment::Infected,
        Compartment::Removed,
        Compartment::CumulativeInfected,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Compartment::Susceptible => "S",
            Compartment::Exposed => "E",
            Compartment::Infected => "I",
            Compartment::Removed => "R",
            Compartment::CumulativeInfected => "I_cum",
        }
    }
}

/// The training window a model was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingWindow {
    /// Number of daily data nodes `N_u`; nodes are the days `1..=N_u`.
    pub n_data: usize,
    /// Residual-mesh step in days.
    pub tau: f64,
    pub start_date: Option<NaiveDate>,
}

/// How a fresh model is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelInit {
    pub seed: u64,
    pub alpha_bounds: (f64, f64),
    pub initial_alpha: f64,
    /// Size (in units of N) of a unit change in a compartment network's last
    /// layer. The susceptible network is centred on 1, the others on 0.
    pub state_scale: f64,
}

impl Default for ModelInit {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            alpha_bounds: DEFAULT_ALPHA_BOUNDS,
            initial_alpha: DEFAULT_INITIAL_ALPHA,
            state_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeirModel {
    pub(crate) compartments: [DenseNet; 5],
    pub(crate) beta: DenseNet,
    pub(crate) mu: DenseNet,
    pub(crate) raw_alpha: f64,
    pub(crate) alpha_bounds: (f64, f64),
    pub(crate) constants: SeirConstants,
    pub(crate) window: TrainingWindow,
    pub(crate) iterations_trained: usize,
}

impl SeirModel {
    /// Random networks drawn from one seeded stream, in the order
    /// `S, E, I, R, I^c, β, μ`. The susceptible network starts from a fully
    /// susceptible population.
    pub fn new(
        constants: SeirConstants,
        window: TrainingWindow,
        init: ModelInit,
    ) -> Result<Self, ModelError> {
        let (lo, hi) = init.alpha_bounds;
        if !(lo > 0.0 && hi <= 1.0 && lo < hi) {
            return Err(ModelError::AlphaBounds(lo, hi));
        }
        if !(init.state_scale > 0.0 && init.state_scale.is_finite()) {
            return Err(ModelError::StateScale(init.state_scale));
        }
        if !(init.initial_alpha > lo && init.initial_alpha < hi) {
            return Err(ModelError::InitialAlpha(init.initial_alpha));
        }
        let scaling = InputScaling::unit_interval(1.0, window.n_data.max(2) as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
        let mut make = |layers: &[usize]| -> Result<DenseNet, ModelError> {
            Ok(DenseNet::with_rng(layers, Activation::Tanh, init.seed, &mut rng)?
                .with_input_scaling(scaling))
        };
        let mut compartments = [
            make(&COMPARTMENT_LAYERS)?,
            make(&COMPARTMENT_LAYERS)?,
            make(&COMPARTMENT_LAYERS)?,
            make(&COMPARTMENT_LAYERS)?,
            make(&COMPARTMENT_LAYERS)?,
        ];
        let beta = make(&RATE_LAYERS)?;
        let mu = make(&RATE_LAYERS)?;
        for (c, net) in compartments.iter_mut().enumerate() {
            let offset = if c == Compartment::Susceptible.index() { 1.0 } else { 0.0 };
            *net = net.clone().with_output_scaling(OutputScaling {
                offset,
                scale: init.state_scale,
            });
        }
        Ok(Self {
            compartments,
            beta,
            mu,
            raw_alpha: bounded_scalar_inverse(init.initial_alpha, lo, hi),
            alpha_bounds: init.alpha_bounds,
            constants,
            window,
            iterations_trained: 0,
        })
    }

    pub fn constants(&self) -> &SeirConstants {
        &self.constants
    }

    pub fn window(&self) -> &TrainingWindow {
        &self.window
    }

    pub fn iterations_trained(&self) -> usize {
        self.iterations_trained
    }

    pub fn is_trained(&self) -> bool {
        self.iterations_trained > 0
    }

    pub fn alpha(&self) -> f64 {
        bounded_scalar(self.raw_alpha, self.alpha_bounds.0, self.alpha_bounds.1)
    }

    pub fn raw_alpha(&self) -> f64 {
        self.raw_alpha
    }

    pub fn set_raw_alpha(&mut self, raw: f64) {
        self.raw_alpha = raw;
    }

    pub fn alpha_bounds(&self) -> (f64, f64) {
        self.alpha_bounds
    }

    pub(crate) fn alpha_slope(&self) -> f64 {
        bounded_scalar_slope(self.raw_alpha, self.alpha_bounds.0, self.alpha_bounds.1)
    }

    /// Order used to build quadrature tables.
    pub fn table_alpha(&self) -> f64 {
        self.alpha().min(MAX_TABLE_ALPHA)
    }

    pub fn network(&self, c: Compartment) -> &DenseNet {
        &self.compartments[c.index()]
    }

    pub fn network_mut(&mut self, c: Compartment) -> &mut DenseNet {
        &mut self.compartments[c.index()]
    }

    pub fn beta_network(&self) -> &DenseNet {
        &self.beta
    }

    pub fn beta_network_mut(&mut self) -> &mut DenseNet {
        &mut self.beta
    }

    pub fn mu_network(&self) -> &DenseNet {
        &self.mu
    }

    pub fn mu_network_mut(&mut self) -> &mut DenseNet {
        &mut self.mu
    }

    /// Compartment value in units of the population.
    pub fn fraction(&self, c: Compartment, t: f64) -> f64 {
        self.network(c).forward(t)
    }

    /// Compartment value in persons.
    pub fn compartment(&self, c: Compartment, t: f64) -> f64 {
        self.constants.population * self.fraction(c, t)
    }

    pub fn beta(&self, t: f64) -> f64 {
        softplus(self.beta.forward(t))
    }

    pub fn mu(&self, t: f64) -> f64 {
        softplus(self.mu.forward(t))
    }

    fn all_networks(&self) -> impl Iterator<Item = &DenseNet> {
        self.compartments.iter().chain([&self.beta, &self.mu])
    }

    /// Length of the flat parameter vector: every network, then the raw order.
    pub fn param_count(&self) -> usize {
        self.all_networks().map(|n| n.param_count()).sum::<usize>() + 1
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for net in self.all_networks() {
            out.extend_from_slice(net.params());
        }
        out.push(self.raw_alpha);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), ModelError> {
        if params.len() != self.param_count() {
            return Err(NnError::ShapeMismatch {
                expected: self.param_count(),
                got: params.len(),
            }
            .into());
        }
        let mut at = 0;
        for net in self
            .compartments
            .iter_mut()
            .chain([&mut self.beta, &mut self.mu])
        {
            let n = net.param_count();
            net.set_params(&params[at..at + n])?;
            at += n;
        }
        self.raw_alpha = params[at];
        Ok(())
    }
}
