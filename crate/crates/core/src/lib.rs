//! Energy-efficient coordinated beamforming for multi-cell MISO downlinks.
//!
//! The crate provides the system model and link metrics ([`model`]), baseline
//! beamformers ([`baselines`]), the per-realization EE optimizer
//! ([`conventional`]), deterministic equivalents of the parametric beam
//! family ([`deteq`]), the large-system EE optimizer built on them
//! ([`asymptotic`]) and a Monte Carlo harness ([`harness`]).

pub mod asymptotic;
pub mod baselines;
pub mod calibration;
pub mod conventional;
pub mod deteq;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
