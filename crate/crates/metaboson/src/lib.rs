//! Numerical toolkit for quadratic bosonic Lindbladians on one-dimensional
//! chains: dynamical matrices, rapidity spectra and band topology,
//! pseudospectra, Majorana and Dirac edge modes, Gaussian steady states,
//! two-time correlations and power spectra.

pub mod correlations;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod models;
pub mod modes;
pub mod nambu;
pub mod pseudospectral;
pub mod spectral;

pub use error::{Error, Result};

/// Library version recorded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
