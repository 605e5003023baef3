//! Time-dependent quantum Monte Carlo (TDQMC) for fermions in one-dimensional
//! harmonic quantum dots.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical piece:
//!
//! - [`numerics`]: grid, finite differences, Crank-Nicolson imaginary-time
//!   steps, Gram-Schmidt and density sampling.
//! - [`model`]: harmonic confinement, soft-core Coulomb repulsion, spin
//!   configurations and the nonlocality parameters.
//! - [`hartree_fock`]: self-consistent Hartree-Fock ground state.
//! - [`engine`]: coupled walker / guide-wave propagation and the mixed
//!   energy estimator.
//! - [`entanglement`]: one-body reduced density matrices and linear entropies.
//! - [`oracle`]: brute-force tensor-grid few-body solver used as a reference.
//! - [`experiments`]: nonlocality scans and the electron-number series.
//!
//! IO, configuration files and the command line live in the `tdqmc-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(feature = "parallel")]
extern crate std;

pub mod engine;
pub mod entanglement;
mod error;
pub mod experiments;
pub mod hartree_fock;
pub(crate) mod interaction;
pub(crate) mod math;
pub mod model;
pub mod numerics;
pub mod oracle;
pub(crate) mod par;

pub use error::{Error, Result};
