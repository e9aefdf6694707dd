//! Convergence studies of the quadrature against closed-form derivatives.

use super::gamma::gamma;
use super::{build_weights, QuadratureError, TimeGrid};

/// A test function with a known Caputo-Hadamard derivative (lower terminal 1).
pub trait AnalyticCase {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, alpha: f64, t: f64) -> f64;
}

/// `u(t) = (log t)^β`, whose derivative is `Γ(β+1)/Γ(β+1−α) (log t)^{β−α}`.
#[derive(Debug, Clone, Copy)]
pub struct LogPower(pub f64);

impl AnalyticCase for LogPower {
    fn value(&self, t: f64) -> f64 {
        t.ln().powf(self.0)
    }

    fn derivative(&self, alpha: f64, t: f64) -> f64 {
        let beta = self.0;
        let l = t.ln();
        if l == 0.0 {
            return 0.0;
        }
        gamma(beta + 1.0) / gamma(beta + 1.0 - alpha) * l.powf(beta - alpha)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl AnalyticCase for Constant {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }

    fn derivative(&self, _alpha: f64, _t: f64) -> f64 {
        0.0
    }
}

/// Max-norm errors over a sequence of halved steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub alpha: f64,
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ConvergenceStudy {
    /// Least-squares slope of `log(error)` against `log(step)`.
    ///
    /// Returns `f64::INFINITY` when every error is exactly zero.
    pub fn order(&self) -> f64 {
        if self.errors.iter().all(|e| *e == 0.0) {
            return f64::INFINITY;
        }
        let pts: Vec<(f64, f64)> = self
            .steps
            .iter()
            .zip(&self.errors)
            .filter(|(_, e)| **e > 0.0)
            .map(|(s, e)| (s.ln(), e.ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        sxy / sxx
    }

    pub fn is_exact(&self) -> bool {
        self.order().is_infinite()
    }
}

/// Max error over all nodes `k ≥ 1` of the uniform grid on `[start, end]`.
pub fn max_error(
    case: &dyn AnalyticCase,
    alpha: f64,
    start: f64,
    end: f64,
    intervals: usize,
) -> Result<f64, QuadratureError> {
    let step = (end - start) / intervals as f64;
    let grid = TimeGrid::uniform(start, step, intervals)?;
    let table = build_weights(&grid, alpha)?;
    let values: Vec<f64> = grid.points().iter().map(|t| case.value(*t)).collect();
    let approx = table.derivatives(&values)?;
    Ok(approx
        .iter()
        .zip(&grid.points()[1..])
        .map(|(d, t)| (d - case.derivative(alpha, *t)).abs())
        .fold(0.0, f64::max))
}

/// Runs `refinements` step halvings on `[1, 2]` starting from `τ = 1/10`.
pub fn measured_order(
    alpha: f64,
    case: &dyn AnalyticCase,
    refinements: usize,
) -> Result<ConvergenceStudy, QuadratureError> {
    study(alpha, case, 1.0, 2.0, 10, refinements)
}

pub fn study(
    alpha: f64,
    case: &dyn AnalyticCase,
    start: f64,
    end: f64,
    coarse_intervals: usize,
    refinements: usize,
) -> Result<ConvergenceStudy, QuadratureError> {
    let mut steps = Vec::with_capacity(refinements + 1);
    let mut errors = Vec::with_capacity(refinements + 1);
    for level in 0..=refinements {
        let n = coarse_intervals << level;
        steps.push((end - start) / n as f64);
        errors.push(max_error(case, alpha, start, end, n)?);
    }
    Ok(ConvergenceStudy {
        alpha,
        steps,
        errors,
    })
}
