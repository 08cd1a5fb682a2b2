//! Boundary-layer asymptotics of thin-film micromagnetic energies with a
//! regularized boundary, in the regimes where the stray-field strength stays
//! bounded, diverges slowly, or diverges like the layer logarithm.

pub mod cli;
pub mod config;
pub mod cutoff;
pub mod energy;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod kernel;
pub mod layer;
pub mod limits;
pub mod meanfield;
pub mod minimize;
pub mod quad;

pub use error::{MmtfError, Result};
