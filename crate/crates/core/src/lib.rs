//! Deterministic desk-scale solver for the space-inhomogeneous kinetic wave
//! equation ∂ₜf + v·∇ₓf = 𝒞[f] near vacuum, with v ∈ ℝ³ and x of dimension
//! 0, 1 or 3.
//!
//! The collision operator is evaluated in its sphere-parametrized form
//! (post-collision velocities v* = V + |u|/2·σ, v₁* = V − |u|/2·σ with a sharp
//! half-space cutoff), free transport is an exact per-velocity shift, and the
//! time integrators (Strang splitting, Picard/Duhamel, Kaniel–Shinbrot,
//! scattering fixed points) are built on those two primitives.

pub mod cli_io;
pub mod collision;
pub mod diagnostics;
pub mod error;
pub mod kaniel_shinbrot;
pub mod phase_grid;
pub mod scattering;
pub mod solver;
pub mod suites;
pub mod transport;

pub use error::{KweError, Result};
pub use phase_grid::{
    DistributionField, PhaseSpaceGrid, SpatialGrid, SphereQuadrature, VelocityGrid, WeightParams,
};
