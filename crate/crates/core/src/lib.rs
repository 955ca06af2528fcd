//! Event-triggered estimation and control of linear-Gaussian processes,
//! with transmissions scheduled by the value of information.
//!
//! A sensor-side encoder filters noisy measurements and decides at every
//! stage whether to send its estimate over a one-slot channel to a
//! controller-side decoder. The scheduling rule compares the expected
//! regulation benefit of a transmission with its price; see [`voi`] for the
//! exact and quadratic variants, and [`simulate`] for closed-loop evaluation.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod lqr;
pub mod model;
pub mod policy;
pub mod simulate;
pub mod voi;

pub use error::{Error, Result};
pub use model::{CostWeights, LinearGaussianModel, ModelDocument, Problem};
