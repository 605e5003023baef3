use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("orbitals live on different grids")]
    GridMismatch,
    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("orbital set is (near-)linearly dependent at index {index} (residual norm {residual:e})")]
    Degenerate { index: usize, residual: f64 },
    #[error("density has no positive weight")]
    ZeroDensity,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("kernel width sigma must be positive or infinite, got {0}")]
    InvalidKernelWidth(f64),
    #[error("position {x} lies in a nodal region of the guide wave")]
    NodalRegion { x: f64 },
    #[error("Hartree-Fock did not converge after {steps} steps")]
    NoConvergence { steps: usize, energy_trace: Vec<f64> },
    #[error("propagation blew up for electron {electron}, walker {walker} at step {step}")]
    BlowUp { electron: usize, walker: usize, step: usize },
    #[error("tensor grid needs {required} amplitudes, above the cap of {cap}")]
    Capacity { required: usize, cap: usize },
    #[error("symmetry projection annihilated the state")]
    SymmetryIncompatible,
    #[error("invalid scan: {0}")]
    InvalidScan(String),
}

pub type Result<T> = core::result::Result<T, Error>;
