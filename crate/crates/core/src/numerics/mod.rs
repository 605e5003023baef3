//! Grid, finite differences, imaginary-time propagation, orthonormalization
//! and density sampling.
//!
//! Everything here works in atomic units (ħ = m = e = 1).

mod grid;
pub(crate) mod orbital;
pub(crate) mod orthonormal;
mod propagate;
pub mod rng;
mod sampling;

pub use grid::Grid1D;
pub use orbital::{
    inner_product, laplacian, laplacian_five_point_values, laplacian_values, Orbital,
};
pub use orthonormal::{gram_schmidt, overlap_matrix, DEGENERACY_RESIDUAL};
pub use propagate::{
    crank_nicolson_step, crank_nicolson_step_with_source, shifted_crank_nicolson_step, imag_time_step, imag_time_step_with,
    BandedSpd, CrankNicolsonScratch, Stencil,
};
pub use sampling::{ensemble_std, sample_positions, DensitySampler};

pub use num_complex::Complex64;
