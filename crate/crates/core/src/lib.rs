//! Pseudo-spectral simulation of the stochastic tamed Navier–Stokes
//! equations on a periodic box, driven by finite-rank Wiener noise and
//! compensated Poisson jumps.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod diagnostics;
pub mod error;
pub mod init;
pub mod noise;
pub mod operators;
pub mod physics;
pub mod rng;
pub mod solver;
pub mod spectral;

pub use error::{Result, StnsError};
pub use spectral::{
    GridSpec, RealField, RealVectorField, ScalarField, SpectralField, SpectralScalarField, SpectralVectorField,
};
