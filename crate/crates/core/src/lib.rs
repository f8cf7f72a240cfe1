//! Quantum systems as time-reversible diffusions on configuration space.
//!
//! The crate builds Madelung velocity fields from wavefunctions, samples the
//! forward and backward Nelson diffusions they drive, checks the stochastic
//! Newton law and the saddle-point action functionals along the sampled
//! paths, solves stationary ground states from the Riccati form of the
//! stationary Hamilton equations, and turns trajectory ensembles into
//! observables (densities, autocorrelations, spectra, first-passage times).

pub mod analysis;
pub mod cli;
pub mod error;
pub mod kinematics;
pub mod numerics;
pub mod state;
pub mod stationary;
pub mod variational;

pub use error::{Error, Result};
