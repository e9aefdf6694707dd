//! Forward integration of the fractional SEIR system.
//!
//! Each step inverts the quadrature at the newest node: with the history
//! `u^0..u^{k−1}` fixed, the state `u^k` solves
//!
//! ```text
//! (c_{k,k} u^k + H_k) / Γ(2−α) = f(t_k, u^k)
//! ```
//!
//! component-wise. States are carried in units of the population.

mod forecast;

pub use forecast::{forecast, Band, ForecastBundle, DEFAULT_UNCERTAINTY};

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fractional::{build_weights, QuadratureError, QuadratureTable, TimeGrid};
use crate::model::SeirConstants;

/// Fixed-point tolerance on the normalized state.
pub const STEP_TOLERANCE: f64 = 1e-12;
pub const MAX_FIXED_POINT_ITERATIONS: usize = 100;
pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Components may undershoot zero by this much (in units of N) before a run fails.
pub const NEGATIVE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("step {step}: implicit solve did not converge")]
    NonConvergence { step: usize },
    #[error("step {step}: compartment {compartment} fell to {value:e} (units of N)")]
    NegativeState {
        step: usize,
        compartment: &'static str,
        value: f64,
    },
    #[error("time step {0} does not divide one day evenly")]
    Step(f64),
    #[error("history has {got} states, step {step} needs {step}")]
    History { step: usize, got: usize },
    #[error("trajectory has {0} samples, at least 2 are required")]
    TooShort(usize),
    #[error("model has not been trained")]
    Untrained,
    #[error("forecast needs a horizon of at least one day")]
    Horizon,
    #[error("uncertainty fraction must lie in [0, 1), got {0}")]
    Uncertainty(f64),
    #[error("training data has {data} days but the model was fitted on {model}")]
    WindowMismatch { data: usize, model: usize },
}

pub const COMPARTMENT_NAMES: [&str; 5] = ["S", "E", "I", "R", "I_cum"];

/// Compartment sizes in persons at day `t` (solver time, origin `t = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicState {
    pub t: f64,
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
    pub i_cum: f64,
}

impl EpidemicState {
    pub fn to_fractions(&self, population: f64) -> [f64; 5] {
        [self.s, self.e, self.i, self.r, self.i_cum].map(|v| v / population)
    }

    pub fn from_fractions(t: f64, u: &[f64; 5], population: f64) -> Self {
        EpidemicState {
            t,
            s: u[0] * population,
            e: u[1] * population,
            i: u[2] * population,
            r: u[3] * population,
            i_cum: u[4] * population,
        }
    }

    /// `S + E + I + R`.
    pub fn total(&self) -> f64 {
        self.s + self.e + self.i + self.r
    }
}

pub type Rate = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Transmission and removal rates as functions of solver time, plus the
/// order and fixed constants of the system.
#[derive(Clone)]
pub struct RateFunctions {
    pub beta: Rate,
    pub mu: Rate,
    pub alpha: f64,
    pub constants: SeirConstants,
}

impl fmt::Debug for RateFunctions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateFunctions")
            .field("beta(1)", &(self.beta)(1.0))
            .field("mu(1)", &(self.mu)(1.0))
            .field("alpha", &self.alpha)
            .field("constants", &self.constants)
            .finish()
    }
}

impl RateFunctions {
    pub fn constant(beta: f64, mu: f64, alpha: f64, constants: SeirConstants) -> Self {
        RateFunctions {
            beta: Arc::new(move |_| beta),
            mu: Arc::new(move |_| mu),
            alpha,
            constants,
        }
    }

    /// Same rates with `beta` multiplied by `factor`.
    pub fn scale_beta(&self, factor: f64) -> Self {
        let beta = Arc::clone(&self.beta);
        RateFunctions {
            beta: Arc::new(move |t| factor * beta(t)),
            ..self.clone()
        }
    }
}

/// Right-hand side in units of N: `[−βSI, βSI − σE, σE − μI, μI, σE]`.
pub fn seir_rhs(u: &[f64; 5], beta: f64, mu: f64, sigma: f64) -> [f64; 5] {
    let [s, e, i, _, _] = *u;
    let infection = beta * s * i;
    [
        -infection,
        infection - sigma * e,
        sigma * e - mu * i,
        mu * i,
        sigma * e,
    ]
}

fn seir_jacobian(u: &[f64; 5], beta: f64, mu: f64, sigma: f64) -> Matrix5<f64> {
    let [s, _, i, _, _] = *u;
    let mut j = Matrix5::zeros();
    j[(0, 0)] = -beta * i;
    j[(0, 2)] = -beta * s;
    j[(1, 0)] = beta * i;
    j[(1, 1)] = -sigma;
    j[(1, 2)] = beta * s;
    j[(2, 1)] = sigma;
    j[(2, 2)] = -mu;
    j[(3, 2)] = mu;
    j[(4, 1)] = sigma;
    j
}

fn max_abs_diff(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn converged(next: &[f64; 5], prev: &[f64; 5]) -> bool {
    let scale = next.iter().map(|v| v.abs()).fold(1.0, f64::max);
    max_abs_diff(next, prev) <= STEP_TOLERANCE * scale
}

/// Computes `u^k` from `history = [u^0, …, u^{k−1}]` (at least `k` states,
/// only the first `k` are read).
pub fn step(
    history: &[[f64; 5]],
    table: &QuadratureTable,
    rates: &RateFunctions,
    k: usize,
) -> Result<[f64; 5], SolverError> {
    if k == 0 || k > table.grid().last_index() {
        return Err(QuadratureError::Index {
            j: k,
            k,
            last: table.grid().last_index(),
        }
        .into());
    }
    if history.len() < k {
        return Err(SolverError::History {
            step: k,
            got: history.len(),
        });
    }
    let gf = table.gamma_factor();
    let weights = table.weights();
    let diag = gf * weights.expanded(k, k);
    let mut hist = [0.0; 5];
    for (j, u) in history[..k].iter().enumerate() {
        let w = gf * weights.expanded(k, j);
        for c in 0..5 {
            hist[c] += w * u[c];
        }
    }

    let t = table.grid().points()[k];
    let (beta, mu) = ((rates.beta)(t), (rates.mu)(t));
    let sigma = rates.constants.sigma;
    let update = |u: &[f64; 5]| {
        let f = seir_rhs(u, beta, mu, sigma);
        let mut next = [0.0; 5];
        for c in 0..5 {
            next[c] = (f[c] - hist[c]) / diag;
        }
        next
    };

    let start = history[k - 1];
    let mut u = start;
    for _ in 0..MAX_FIXED_POINT_ITERATIONS {
        let next = update(&u);
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        if converged(&next, &u) {
            return Ok(next);
        }
        u = next;
    }

    // Newton on G(u) = diag·u + H − f(u).
    let mut u = start;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let f = seir_rhs(&u, beta, mu, sigma);
        let g = Vector5::from_fn(|c, _| diag * u[c] + hist[c] - f[c]);
        let jac = Matrix5::identity() * diag - seir_jacobian(&u, beta, mu, sigma);
        let delta = jac.lu().solve(&(-g)).ok_or(SolverError::NonConvergence { step: k })?;
        let next: [f64; 5] = std::array::from_fn(|c| u[c] + delta[c]);
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        if converged(&next, &u) {
            return Ok(next);
        }
        u = next;
    }
    Err(SolverError::NonConvergence { step: k })
}

/// Number of solver steps per day for step `tau`.
pub fn steps_per_day(tau: f64) -> Result<usize, SolverError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(SolverError::Step(tau));
    }
    let n = (1.0 / tau).round();
    if (n * tau - 1.0).abs() > 1e-9 {
        return Err(SolverError::Step(tau));
    }
    Ok(n as usize)
}

/// Continues `history` (states on the table's grid from node 0) up to the
/// last grid node.
pub fn integrate(
    table: &QuadratureTable,
    history: Vec<[f64; 5]>,
    rates: &RateFunctions,
) -> Result<Vec<[f64; 5]>, SolverError> {
    let last = table.grid().last_index();
    let mut states = history;
    if states.is_empty() {
        return Err(SolverError::History { step: 1, got: 0 });
    }
    states.reserve(last + 1 - states.len().min(last + 1));
    for k in states.len()..=last {
        let u = step(&states, table, rates, k)?;
        if let Some(c) = u.iter().position(|v| *v < -NEGATIVE_TOLERANCE) {
            return Err(SolverError::NegativeState {
                step: k,
                compartment: COMPARTMENT_NAMES[c],
                value: u[c],
            });
        }
        states.push(u);
    }
    Ok(states)
}

/// Daily samples of a forward solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<EpidemicState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn column(&self, f: impl Fn(&EpidemicState) -> f64) -> Vec<f64> {
        self.states.iter().map(f).collect()
    }
}

/// Integrates from `initial` at `t = 1` for `horizon_days`, stepping at
/// `tau` and sampling once per day.
pub fn solve(
    initial: &EpidemicState,
    rates: &RateFunctions,
    horizon_days: usize,
    tau: f64,
) -> Result<Trajectory, SolverError> {
    let n = rates.constants.population;
    let per_day = steps_per_day(tau)?;
    let first = EpidemicState { t: 1.0, ..*initial };
    if horizon_days == 0 {
        return Ok(Trajectory {
            states: vec![first],
        });
    }
    let grid = TimeGrid::uniform(1.0, tau, horizon_days * per_day)?;
    let table = build_weights(&grid, rates.alpha)?;
    let fine = integrate(&table, vec![first.to_fractions(n)], rates)?;
    let states = (0..=horizon_days)
        .map(|d| EpidemicState::from_fractions(1.0 + d as f64, &fine[d * per_day], n))
        .collect();
    Ok(Trajectory { states })
}

/// Daily increments of the cumulative-infected and removed compartments.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyNew {
    pub infected: Vec<f64>,
    pub removed: Vec<f64>,
}

/// `I^n(t_j) = I^c(t_{j+1}) − I^c(t_j)` and `R^n(t_j) = R(t_{j+1}) − R(t_j)`.
pub fn daily_new(traj: &Trajectory) -> Result<DailyNew, SolverError> {
    if traj.len() < 2 {
        return Err(SolverError::TooShort(traj.len()));
    }
    let diff = |f: fn(&EpidemicState) -> f64| {
        traj.states
            .windows(2)
            .map(|w| f(&w[1]) - f(&w[0]))
            .collect::<Vec<_>>()
    };
    Ok(DailyNew {
        infected: diff(|s| s.i_cum),
        removed: diff(|s| s.r),
    })
}
