//! Pseudospectral solver for mass-constrained minimizers of a two-component
//! half-Laplacian Schrödinger system, with the experiment harness used to
//! probe its near-critical blow-up.

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod ground_state;
pub mod minimizer;
pub mod oracle;
pub mod output;
pub mod potentials;
pub mod spectral;
pub mod verification;

pub use error::{Error, ErrorClass, Result};
