//! Caputo-Hadamard fractional derivatives of sampled functions.
//!
//! For `0 < α < 1` the derivative with lower terminal `a > 0` is
//!
//! ```text
//! D^α u(t) = 1/Γ(1−α) ∫_a^t (log(t/s))^{−α} δu(s) ds/s,   δ = s d/ds
//! ```
//!
//! and is approximated at grid node `t_k` by the piecewise-quadratic rule
//! `1/Γ(2−α) Σ_{j=1..k} c_{j,k} (u^j − u^{j−1})`, which has error
//! `O(τ^{3−α})` on uniform meshes for smooth `u`.

mod convergence;
mod gamma;
mod grid;
mod weights;

pub use convergence::{
    max_error, measured_order, study, AnalyticCase, Constant, ConvergenceStudy, LogPower,
};
pub use gamma::gamma;
pub use grid::TimeGrid;
pub use weights::{
    a_coeff, b_coeff, build_weights, ch_derivative, weight_sensitivity, QuadratureTable,
    WeightRows,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("fractional order {0} outside (0, 1)")]
    OrderOutOfRange(f64),
    #[error("index pair (j = {j}, k = {k}) out of range for a grid with last index {last}")]
    Index { j: usize, k: usize, last: usize },
    #[error("expected at least {needed} samples, got {got}")]
    LengthMismatch { needed: usize, got: usize },
}
