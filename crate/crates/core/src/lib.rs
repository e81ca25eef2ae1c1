//! Phase-space mollifiers, fractional Sobolev norms, renormalization
//! commutators and entropy diagnostics for the relativistic Vlasov-Maxwell
//! system on periodic grids.

pub mod error;
pub mod fields;
pub mod kernels;
pub mod cli;
pub mod commutators;
pub mod diagnostics;
pub mod norms;
pub mod relativistic;
pub mod solver;
mod spectral;

pub use error::{Error, Result};
