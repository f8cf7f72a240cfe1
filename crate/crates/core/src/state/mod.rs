//! Wavefunctions, their time evolution and their hydrodynamic decomposition.

pub mod coherent;
pub mod grid;
pub mod madelung;
pub mod potential;
pub mod propagate;
pub mod wavefield;

pub use coherent::{harmonic_eigenstate, CoherentStateSpec, CoherentVelocity};
pub use grid::{GridSpec, PhysicalParams};
pub use madelung::{
    madelung_decompose, madelung_residuals, DensityFloor, MadelungFields, MadelungResiduals,
    ResidualNorms,
};
pub use potential::PotentialSpec;
pub use propagate::{propagate_crank_nicolson, CrankNicolson};
pub use wavefield::{gaussian_packet, WaveField};
