//! Energy-efficiency optimization of RIS-assisted MIMO links under transmit
//! power and electromagnetic-field exposure constraints.
//!
//! * [`model`]: link model, bit-per-Joule objective, feasibility checks.
//! * [`subsolvers`]: per-block optimizers (phases, beamformer/combiner, power).
//! * [`algorithms`]: alternating maximization, the closed-form isotropic
//!   optimum and the six compared schemes.
//! * [`channel`]: seeded Rician channel generation and channel dumps.
//! * [`experiments`]: paired Monte Carlo sweeps with CSV output.
//! * [`validation`]: oracle-based property checks.

pub mod algorithms;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod model;
pub mod subsolvers;
pub mod validation;

pub use error::{Error, Result};
