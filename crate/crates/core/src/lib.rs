//! Stationary optical phase noise of a levitated nanosphere in a Fabry-Pérot
//! cavity, with and without continuous-spontaneous-localization (CSL)
//! momentum diffusion.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`params`] resolves a [`SystemSpec`] in laboratory terms into the full
//!    set of SI quantities ([`DerivedParams`]).
//! 2. [`noise`] turns those into the four momentum-diffusion rates
//!    ([`DiffusionBudget`]).
//! 3. [`steady_state`] assembles the linear drift/diffusion model for
//!    `(x, p, X, Y)`, checks it is Hurwitz and solves the Lyapunov equation
//!    for the stationary covariance, from which `<Y²>` is read off.
//! 4. [`experiments`] runs the trap-frequency and cavity-length sweeps and
//!    searches for the smallest collapse rate that a given measurement
//!    precision can resolve.
//!
//! [`oracle`] is an independent Euler–Maruyama integrator of the same linear
//! system, used to cross-check the Lyapunov solver.

pub mod constants;
pub mod error;
pub mod experiments;
pub mod noise;
pub mod oracle;
pub mod params;
pub mod presets;
pub mod steady_state;

pub use constants::Constants;
pub use error::{Error, Result};
pub use experiments::{
    detectable_lambda_bound, discriminability, sweep_length, sweep_omega, BoundOptions,
    BoundOutcome, BoundResult, Discriminability, Protocol, SweepAxis, SweepPoint, SweepResult,
};
pub use noise::DiffusionBudget;
pub use oracle::{ConvergenceReport, EmpiricalCovariance, SimConfig};
pub use params::{
    CavitySpec, Coupling, CslSpec, DerivedParams, DriveSpec, EnvironmentSpec, NanosphereSpec,
    SystemSpec, TrapDrive, TrapSpec,
};
pub use steady_state::{LinearModel, PhaseVariance, StabilityReport, SteadyState};
