//! Inverse multifractal constructions at desk scale.

pub mod bernoulli;
pub mod cli;
pub mod construct;
pub mod dyadic;
pub mod error;
pub mod legendre;
pub mod logspace;
pub mod serde_ext;
pub mod spectra;
pub mod wavelet;

pub use error::{Error, Result};
