//! Harness library behind the `manp` binary: run configuration, the
//! Algorithm-style stepping loop, the convergence suites and the dry-run
//! condition checks.

use thiserror::Error;

pub mod config;
pub mod experiments;
pub mod mms;
pub mod sim;

pub use config::{Experiment, RunConfig};
pub use sim::{run, DiagRow, RunOutput, Simulation};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] manp_core::grid::GridError),
    #[error(transparent)]
    Spectral(#[from] manp_core::spectral::SpectralError),
    #[error(transparent)]
    Physics(#[from] manp_core::physics::PhysicsError),
    #[error(transparent)]
    Etd(#[from] manp_core::etd::EtdError),
    #[error(transparent)]
    CurlFree(#[from] manp_core::curlfree::CurlFreeError),
    #[error(transparent)]
    Diagnostics(#[from] manp_core::diagnostics::DiagnosticsError),
    #[error("structure violation at step {step}: {what} = {value:e} exceeds {limit:e}")]
    StructureViolation { step: usize, what: &'static str, value: f64, limit: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Exit-code category: 2 config, 3 io, 4 solver/structure failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Grid(_) => 2,
            RunError::Io(_) => 3,
            _ => 4,
        }
    }
}
