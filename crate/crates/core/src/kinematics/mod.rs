//! Nelson diffusions driven by Madelung velocity fields.

pub mod derivative;
pub mod ensemble;
pub mod field;
pub mod rng;
pub mod sampler;

pub use derivative::{mean_derivative, nelson_newton_residual, BinnedEstimate, Bins, NewtonResidual, MIN_BIN_PATHS};
pub use ensemble::{
    load_ensemble, sha256_hex, BoundaryPolicy, Direction, EnsembleManifest, SdeConfig, TrajectoryEnsemble,
};
pub use field::{
    interpolate_velocity, CoherentField, PerturbedField, StationaryField, UniformField, VelocityComponent,
    VelocityField,
};
pub use rng::PathRng;
pub use sampler::{sample_backward, sample_forward, sample_initial_positions, GridCdf};
