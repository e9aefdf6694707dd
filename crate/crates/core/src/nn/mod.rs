//! Small dense networks with reverse-mode gradients and an Adam optimizer.

mod adam;
mod dense;
mod record;

pub use adam::{AdamConfig, OptimizerState};
pub use dense::{
    parameter_count, Activation, DenseNet, ForwardPass, GradientTape, InputScaling, OutputScaling,
};
pub use record::NetworkRecord;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("invalid network shape: {0}")]
    Shape(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("gradient requested from a forward pass that no longer matches the network")]
    StaleTape,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smooth increasing map of ℝ onto `(lo, hi)`; `raw = 0` lands on the midpoint.
pub fn bounded_scalar(raw: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * sigmoid(raw)
}

/// `d bounded_scalar / d raw`.
pub fn bounded_scalar_slope(raw: f64, lo: f64, hi: f64) -> f64 {
    let s = sigmoid(raw);
    (hi - lo) * s * (1.0 - s)
}

/// Inverse of [`bounded_scalar`] for `value` strictly inside `(lo, hi)`.
pub fn bounded_scalar_inverse(value: f64, lo: f64, hi: f64) -> f64 {
    let p = (value - lo) / (hi - lo);
    (p / (1.0 - p)).ln()
}

/// `log(1 + e^x)`, evaluated without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn softplus_slope(x: f64) -> f64 {
    sigmoid(x)
}

pub fn softplus_inverse(y: f64) -> f64 {
    // log(e^y − 1) = y + log(1 − e^{−y})
    y + (-(-y).exp()).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn bounded_midpoint_and_tails() {
        assert_eq!(bounded_scalar(0.0, 0.0, 1.0), 0.5);
        assert!((bounded_scalar(40.0, 0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(bounded_scalar(-40.0, 0.0, 1.0) < 1e-15);
        assert!(bounded_scalar(-800.0, 0.05, 1.0) >= 0.05);
    }

    #[test]
    fn bounded_inverse_round_trip() {
        let raw = bounded_scalar_inverse(0.9, 0.05, 1.0);
        assert_relative_eq!(bounded_scalar(raw, 0.05, 1.0), 0.9, epsilon = 1e-14);
    }

    #[test]
    fn softplus_is_stable() {
        assert_relative_eq!(softplus(0.0), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert_relative_eq!(softplus(softplus_inverse(0.25)), 0.25, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn bounded_is_monotone(a in -30.0f64..30.0, d in 1e-3f64..5.0) {
            prop_assert!(bounded_scalar(a, 0.05, 1.0) < bounded_scalar(a + d, 0.05, 1.0));
        }

        #[test]
        fn bounded_slope_matches_difference(raw in -8.0f64..8.0) {
            let h = 1e-6;
            let fd = (bounded_scalar(raw + h, 0.05, 1.0) - bounded_scalar(raw - h, 0.05, 1.0)) / (2.0 * h);
            prop_assert!((fd - bounded_scalar_slope(raw, 0.05, 1.0)).abs() < 1e-8);
        }
    }
}
