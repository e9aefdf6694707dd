//! Calibration of a Caputo-Hadamard fractional SEIR model from daily case
//! counts with physics-informed networks.
//!
//! - [`fractional`]: quadrature weights for the Caputo-Hadamard derivative.
//! - [`nn`]: dense networks, backpropagation and Adam.
//! - [`model`]: the trainable model, its loss and the training loop.
//! - [`solver`]: forward integration and forecast bands.
//! - [`data`]: case-series ingestion and preconditioning.
//! - [`synthetic`]: outbreaks generated from known parameters.

pub mod data;
pub mod fractional;
pub mod model;
pub mod nn;
pub mod solver;
pub mod synthetic;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quadrature.md")]
    mod quadrature {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/forecasting.md")]
    mod forecasting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
