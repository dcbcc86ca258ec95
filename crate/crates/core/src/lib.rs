//! Simulation of a harmonic oscillator continuously monitored through a
//! quantum noise field: Wiener path sampling, the explicit per-path
//! propagator, closed-form moments and Monte-Carlo cross-checks.

pub mod acceptance;
pub mod analytic;
pub mod config;
pub mod error;
pub mod fock;
pub mod functionals;
pub mod limits;
pub mod montecarlo;
pub mod params;
pub mod path;
pub mod stats;

pub use error::{Error, Result};
pub use functionals::{compute_functionals, z_via_ito_parts, PathFunctionals, Snapshot};
pub use params::{derived_constants, measurement_window, ModelParams, Regime, RegimeReport, TimeGrid};
pub use path::{rescale_path, sample_path, BrownianPath};
pub use stats::{ComplexEstimate, MCEstimate};
