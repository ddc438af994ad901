//! Pilot-wave model of price dynamics.
//!
//! A complex "financial wave" `ψ(t, q)` over price space is evolved with the
//! Schrödinger equation. Its amplitude induces a quantum (mental) potential
//! and force that act on prices next to the classical force `−∇V`; its phase
//! gradient acts as a guidance velocity. On top of that sit stochastic
//! baselines (Wiener, GBM, stochastic volatility, Bohm–Vigier noise), a
//! Picard fixed-point solver for forces that are only bounded and measurable
//! in time, and diagnostics such as quadratic variation and martingale tests.
//!
//! Module map:
//!
//! * [`grid_wave`]: spatial grids, wave fields, Crank–Nicolson evolution,
//!   polar decomposition, quantum potential and force.
//! * [`classical`]: price phase space, financial energy, leapfrog dynamics.
//! * [`bohm`]: Bohm–Newton and guidance trajectories, Born sampling, ensembles.
//! * [`picard`]: integral-equation solver and the phase-space lift.
//! * [`stochastic`]: noise, GBM, Bohm–Vigier paths, random initials and masses,
//!   stochastic volatility.
//! * [`diagnostics`]: quadratic variation, drift test, log-normality, moments.
//! * [`scenario`]: scenario files, validation and the run driver used by the CLI.

pub mod bohm;
pub mod classical;
pub mod diagnostics;
pub mod error;
pub mod grid_wave;
pub mod output;
pub mod picard;
pub mod rng;
pub mod scenario;
pub mod stochastic;
pub mod trajectory;

pub use classical::{ClassicalPotential, FinancialMass, MarketState, Schedule};
pub use error::{Error, Result};
pub use grid_wave::{
    ForceGrid, Interpolation, PolarDecomposition, PotentialGrid, PotentialKind, SchrodingerStepper,
    SpatialGrid, WaveField,
};
pub use num_complex::Complex64;
pub use trajectory::Trajectory;
