use alloc::vec::Vec;

use num_complex::Complex64;

use super::Orbital;
use crate::{Error, Result};

/// Finite-difference stencil for the kinetic operator −½∇² with zero
/// Dirichlet ghost points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Second order, tridiagonal.
    ThreePoint,
    /// Fourth order, pentadiagonal.
    #[default]
    FivePoint,
}

impl Stencil {
    /// Half bandwidth of the stencil.
    pub fn reach(self) -> usize {
        match self {
            Stencil::ThreePoint => 1,
            Stencil::FivePoint => 2,
        }
    }

    /// Coefficients of −½∇² at offsets 0, 1, .. reach (the operator is
    /// symmetric).
    pub fn kinetic_coefficients(self, dx: f64) -> [f64; 3] {
        let h = 1.0 / (dx * dx);
        match self {
            Stencil::ThreePoint => [h, -0.5 * h, 0.0],
            Stencil::FivePoint => [1.25 * h, -2.0 / 3.0 * h, 1.0 / 24.0 * h],
        }
    }

    /// (−½∇² + v) φ at every node.
    pub fn apply_hamiltonian(self, values: &[Complex64], potential: &[f64], dx: f64, out: &mut [Complex64]) {
        let c = self.kinetic_coefficients(dx);
        let n = values.len();
        let r = self.reach();
        let zero = Complex64::new(0.0, 0.0);
        let at = |i: isize| if i < 0 || i >= n as isize { zero } else { values[i as usize] };
        let edge = |i: usize| {
            let mut acc = values[i] * (c[0] + potential[i]);
            for m in 1..=r as isize {
                acc += (at(i as isize - m) + at(i as isize + m)) * c[m as usize];
            }
            acc
        };
        if n < 2 * r + 1 {
            for i in 0..n {
                out[i] = edge(i);
            }
            return;
        }
        for i in (0..r).chain(n - r..n) {
            out[i] = edge(i);
        }
        let (out, v, p) = (&mut out[..n], &values[..n], &potential[..n]);
        if r == 1 {
            for i in 1..n - 1 {
                out[i] = v[i] * (c[0] + p[i]) + (v[i - 1] + v[i + 1]) * c[1];
            }
        } else {
            for i in 2..n - 2 {
                out[i] = v[i] * (c[0] + p[i]) + (v[i - 1] + v[i + 1]) * c[1] + (v[i - 2] + v[i + 2]) * c[2];
            }
        }
    }

    /// ∇²φ at every node.
    pub fn laplacian(self, values: &[Complex64], dx: f64) -> Vec<Complex64> {
        match self {
            Stencil::ThreePoint => super::laplacian_values(values, dx),
            Stencil::FivePoint => super::laplacian_five_point_values(values, dx),
        }
    }
}

/// LDLᵀ factorization of a symmetric positive-definite banded matrix with
/// node-dependent diagonal and constant off-diagonals.
#[derive(Debug, Clone, Default)]
pub struct BandedSpd {
    reach: usize,
    // reciprocal pivots
    d: Vec<f64>,
    // l[i * 2 + m] = L[i][i - m - 1]
    l: Vec<f64>,
}

impl BandedSpd {
    /// Factors the matrix with diagonal `diag(i)` and constant off-diagonals
    /// `off[1]`, `off[2]` (`off[0]` is ignored; `off[2]` must be zero for
    /// reach 1).
    pub fn factor(&mut self, diag: impl Fn(usize) -> f64, off: [f64; 3], reach: usize, n: usize) {
        self.reach = reach;
        let off2 = if reach >= 2 { off[2] } else { 0.0 };
        self.d.resize(n, 0.0);
        self.l.resize(2 * n + 4, 0.0);
        self.l[..4].fill(0.0);
        let (mut d1, mut d2) = (0.0, 0.0); // d[i-1], d[i-2]
        for i in 0..n {
            let l1 = self.l[i * 2];
            let l2 = self.l[i * 2 + 1];
            let di = diag(i) - l1 * l1 * d1 - l2 * l2 * d2;
            let inv = 1.0 / di;
            self.d[i] = inv;
            // L[i+1][i] needs L[i+1][i-1] (set on the previous row).
            self.l[(i + 1) * 2] = (off[1] - self.l[(i + 1) * 2 + 1] * l1 * d1) * inv;
            self.l[(i + 2) * 2 + 1] = off2 * inv;
            d2 = d1;
            d1 = di;
        }
    }

    pub fn solve(&self, b: &mut [Complex64]) {
        let n = b.len();
        let l = &self.l;
        let (mut y1, mut y2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for i in 0..n {
            let y = b[i] - y1 * l[i * 2] - y2 * l[i * 2 + 1];
            b[i] = y;
            y2 = y1;
            y1 = y;
        }
        for (v, d) in b.iter_mut().zip(&self.d) {
            *v *= *d;
        }
        let (mut x1, mut x2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for i in (0..n).rev() {
            let x = b[i] - x1 * l[(i + 1) * 2] - x2 * l[(i + 2) * 2 + 1];
            b[i] = x;
            x2 = x1;
            x1 = x;
        }
    }

    /// Strided variant for tensor-grid lines.
    pub fn solve_strided(&self, data: &mut [Complex64], start: usize, stride: usize, line: &mut Vec<Complex64>) {
        let n = self.d.len();
        line.clear();
        line.extend((0..n).map(|i| data[start + i * stride]));
        self.solve(line);
        for (i, v) in line.iter().enumerate() {
            data[start + i * stride] = *v;
        }
    }
}

/// Reusable buffers for [`crank_nicolson_step`].
#[derive(Debug, Default, Clone)]
pub struct CrankNicolsonScratch {
    rhs: Vec<Complex64>,
    band: BandedSpd,
}

/// One Crank-Nicolson imaginary-time step
/// (1 + dτ/2·H) φ' = (1 − dτ/2·H) φ with H = −½∇² + v. Second order in dτ,
/// unconditionally stable, and it keeps the discrete eigenvectors of H fixed.
pub fn crank_nicolson_step(
    values: &mut [Complex64],
    potential: &[f64],
    dx: f64,
    dtau: f64,
    stencil: Stencil,
    scratch: &mut CrankNicolsonScratch,
) {
    crank_nicolson_step_with_source(values, potential, None, dx, dtau, stencil, scratch)
}

/// As [`crank_nicolson_step`], with an explicit term −dτ·`source` added to
/// the right-hand side. Used for the nonlocal exchange action.
pub fn crank_nicolson_step_with_source(
    values: &mut [Complex64],
    potential: &[f64],
    source: Option<&[Complex64]>,
    dx: f64,
    dtau: f64,
    stencil: Stencil,
    scratch: &mut CrankNicolsonScratch,
) {
    let n = values.len();
    debug_assert_eq!(potential.len(), n);
    if dtau == 0.0 {
        return;
    }
    let half = 0.5 * dtau;
    scratch.rhs.clear();
    scratch.rhs.resize(n, Complex64::new(0.0, 0.0));
    stencil.apply_hamiltonian(values, potential, dx, &mut scratch.rhs);
    for (r, v) in scratch.rhs.iter_mut().zip(values.iter()) {
        *r = v - *r * half;
    }
    if let Some(src) = source {
        for (r, s) in scratch.rhs.iter_mut().zip(src) {
            *r -= s * dtau;
        }
    }
    let c = stencil.kinetic_coefficients(dx);
    let off = [0.0, half * c[1], half * c[2]];
    scratch.band.factor(|i| 1.0 + half * (c[0] + potential[i]), off, stencil.reach(), n);
    scratch.band.solve(&mut scratch.rhs);
    values.copy_from_slice(&scratch.rhs);
}

/// Crank-Nicolson step shifted by the Rayleigh quotient
/// μ = Re⟨φ|Hφ + s⟩/⟨φ|φ⟩ (trapezoid weights), solving
/// (1 + dτ/2·(H − μ)) φ' = (1 − dτ/2·(H − μ)) φ − dτ·s.
/// Eigenvectors of the nonlinear problem H φ + s = μ φ are fixed points.
/// Returns μ.
pub fn shifted_crank_nicolson_step(
    values: &mut [Complex64],
    potential: &[f64],
    source: Option<&[Complex64]>,
    grid: &super::Grid1D,
    dtau: f64,
    stencil: Stencil,
    scratch: &mut CrankNicolsonScratch,
) -> f64 {
    let n = values.len();
    let dx = grid.dx();
    scratch.rhs.resize(n, Complex64::new(0.0, 0.0));
    stencil.apply_hamiltonian(values, potential, dx, &mut scratch.rhs);
    if let Some(src) = source {
        scratch.rhs.iter_mut().zip(src).for_each(|(r, s)| *r += s);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for a in 0..n {
        let w = grid.weight(a);
        num += w * (values[a].conj() * scratch.rhs[a]).re;
        den += w * values[a].norm_sqr();
    }
    let mu = num / den;
    if dtau == 0.0 {
        return mu;
    }
    let half = 0.5 * dtau;
    // rhs currently (H φ + s); rebuild as φ − dτ/2 (H − μ)φ − dτ s.
    match source {
        Some(src) => {
            for ((r, v), s) in scratch.rhs.iter_mut().zip(values.iter()).zip(src) {
                *r = v * (1.0 + half * mu) - (*r - s) * half - s * dtau;
            }
        }
        None => {
            for (r, v) in scratch.rhs.iter_mut().zip(values.iter()) {
                *r = v * (1.0 + half * mu) - *r * half;
            }
        }
    }
    let c = stencil.kinetic_coefficients(dx);
    let off = [0.0, half * c[1], half * c[2]];
    scratch.band.factor(|i| 1.0 + half * (c[0] + potential[i] - mu), off, stencil.reach(), n);
    scratch.band.solve(&mut scratch.rhs);
    values.copy_from_slice(&scratch.rhs);
    mu
}

/// Applies exp(−dτ·H) to second order in dτ, H = −½∇² + `v_total`, on the
/// default stencil. The result is not renormalized.
pub fn imag_time_step(phi: &Orbital, v_total: &[f64], dtau: f64) -> Result<Orbital> {
    imag_time_step_with(phi, v_total, dtau, Stencil::default())
}

pub fn imag_time_step_with(phi: &Orbital, v_total: &[f64], dtau: f64, stencil: Stencil) -> Result<Orbital> {
    if v_total.len() != phi.grid().len() {
        return Err(Error::GridMismatch);
    }
    if v_total.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("potential"));
    }
    if !(dtau >= 0.0 && dtau.is_finite()) {
        return Err(Error::NonFinite("imaginary-time step"));
    }
    let mut out = phi.clone();
    let dx = phi.grid().dx();
    crank_nicolson_step(out.values_mut(), v_total, dx, dtau, stencil, &mut CrankNicolsonScratch::default());
    Ok(out)
}
