//! The financial pilot wave on a grid.

mod export;
pub mod families;
mod field;
mod grid;
mod polar;
mod potential;
mod stencil;
mod stepper;

pub use export::{wave_csv, WaveHeader};
pub use families::{PolynomialShape, WaveSpec};
pub use field::WaveField;
pub use grid::{Axis, Interpolation, SpatialGrid, MIN_POINTS};
pub use polar::{
    continuity_residual, guidance_velocity, mental_force, polar_decompose, quantum_potential,
    PolarDecomposition, NODAL_FLOOR_FRACTION,
};
pub use potential::{ForceGrid, PotentialGrid, PotentialKind, Probe, VectorField};
pub use stepper::{evolve_schrodinger, SchrodingerStepper, NORM_DRIFT_LIMIT};
