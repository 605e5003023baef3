use alloc::vec::Vec;

use num_complex::Complex64;

use super::orbital::dot_weighted;
use super::Orbital;
use crate::{math, Error, Result};

/// Relative residual below which a vector counts as linearly dependent on
/// its predecessors. Its square bounds the overlap condition number at 1e12.
pub const DEGENERACY_RESIDUAL: f64 = 1e-6;

/// Overlap matrix S_ij = ⟨φ_i, φ_j⟩, row-major.
pub fn overlap_matrix(orbitals: &[Orbital]) -> Result<Vec<Complex64>> {
    let n = orbitals.len();
    let mut s = alloc::vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = super::inner_product(&orbitals[i], &orbitals[j])?;
        }
    }
    Ok(s)
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Order is kept:
/// orbital 0 is only rescaled, orbital k is made orthogonal to 0..k.
pub fn gram_schmidt(orbitals: &[Orbital]) -> Result<Vec<Orbital>> {
    if let Some(first) = orbitals.first() {
        if orbitals.iter().any(|o| o.grid() != first.grid()) {
            return Err(Error::GridMismatch);
        }
    }
    let mut out = orbitals.to_vec();
    let mut views: Vec<&mut [Complex64]> = out.iter_mut().map(|o| o.values_mut()).collect();
    let grid = *orbitals.first().map(|o| o.grid()).unwrap_or(&Default::default());
    orthonormalize_in_place(&grid, &mut views)?;
    Ok(out)
}

/// In-place variant over raw amplitude slices sharing `grid`.
pub(crate) fn orthonormalize_in_place(
    grid: &super::Grid1D,
    vectors: &mut [&mut [Complex64]],
) -> Result<()> {
    for k in 0..vectors.len() {
        let original = math::sqrt(dot_weighted(grid, vectors[k], vectors[k]).re);
        if !original.is_finite() {
            return Err(Error::NonFinite("orbital norm"));
        }
        if original == 0.0 {
            return Err(Error::Degenerate { index: k, residual: 0.0 });
        }
        let (done, rest) = vectors.split_at_mut(k);
        let v = &mut *rest[0];
        for _pass in 0..2 {
            for u in done.iter() {
                let c = dot_weighted(grid, v, u);
                for (a, b) in v.iter_mut().zip(u.iter()) {
                    *a -= c * b;
                }
            }
        }
        let norm = math::sqrt(dot_weighted(grid, v, v).re);
        let residual = norm / original;
        if residual < DEGENERACY_RESIDUAL {
            return Err(Error::Degenerate { index: k, residual });
        }
        let s = 1.0 / norm;
        v.iter_mut().for_each(|a| *a *= s);
    }
    Ok(())
}
