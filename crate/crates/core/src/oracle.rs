//! Brute-force few-body solver: the full N-electron wave function on a
//! tensor-product grid, relaxed in imaginary time with symmetry projection.
//!
//! Amplitudes are stored with the first electron's coordinate varying
//! slowest. Inner products use the plain dx^N measure, under which the
//! finite-difference Hamiltonian is exactly symmetric.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::entanglement::DensityMatrix;
use crate::model::{harmonic_orbital, Spin, SystemConfig};
use crate::numerics::{BandedSpd, Grid1D, Stencil};
use crate::{math, Error, Result};

/// Largest electron count the permutation projector handles.
pub const MAX_ELECTRONS: usize = 4;

/// Exchange symmetry imposed on the spatial wave function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Antisymmetric under swaps inside each equal-spin block.
    Antisymmetric,
    /// Symmetric under every coordinate swap (spatial part of a singlet).
    Symmetric,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub grid: Grid1D,
    pub dtau: f64,
    pub max_steps: usize,
    /// Stop once |ΔE| per step falls below this.
    pub tolerance: f64,
    /// Energy is evaluated every `check_every` steps.
    pub check_every: usize,
    pub max_amplitudes: usize,
    pub stencil: Stencil,
}

impl OracleOptions {
    /// Box and resolution that keep the N-body density well inside the
    /// grid at ω = 1.
    pub fn for_electrons(n: usize) -> Self {
        let grid = match n {
            0..=2 => Grid1D::symmetric(6.0, 64),
            3 => Grid1D::symmetric(7.0, 64),
            _ => Grid1D::symmetric(7.0, 32),
        }
        .expect("static grid");
        Self::with_grid(grid)
    }

    pub fn with_grid(grid: Grid1D) -> Self {
        Self {
            grid,
            dtau: 0.05,
            max_steps: 20_000,
            tolerance: 1e-9,
            check_every: 10,
            max_amplitudes: 1 << 22,
            stencil: Stencil::FivePoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorWavefunction {
    n: usize,
    grid: Grid1D,
    amplitudes: Vec<Complex64>,
    symmetry: Symmetry,
    spins: Vec<Spin>,
}

fn checked_size(n: usize, g: usize, cap: usize) -> Result<usize> {
    let mut size: usize = 1;
    for _ in 0..n {
        size = size.checked_mul(g).ok_or(Error::Capacity { required: usize::MAX, cap })?;
    }
    if n > MAX_ELECTRONS || size > cap {
        return Err(Error::Capacity { required: size, cap });
    }
    Ok(size)
}

impl TensorWavefunction {
    pub fn new(grid: Grid1D, spins: Vec<Spin>, symmetry: Symmetry, amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = spins.len();
        let size = checked_size(n, grid.len(), usize::MAX)?;
        if amplitudes.len() != size {
            return Err(Error::InvalidConfig {
                field: "amplitudes",
                reason: format!("expected {size} values, got {}", amplitudes.len()),
            });
        }
        Ok(Self { n, grid, amplitudes, symmetry, spins })
    }

    /// Π_i f_i(x_i).
    pub fn product(grid: Grid1D, spins: Vec<Spin>, symmetry: Symmetry, factors: &[&[Complex64]]) -> Result<Self> {
        let n = spins.len();
        let g = grid.len();
        let size = checked_size(n, g, usize::MAX)?;
        let mut amps = alloc::vec![Complex64::new(0.0, 0.0); size];
        let mut coords = alloc::vec![0usize; n];
        for (idx, a) in amps.iter_mut().enumerate() {
            decompose(idx, g, &mut coords);
            *a = coords.iter().zip(factors).map(|(&c, f)| f[c]).product();
        }
        Self::new(grid, spins, symmetry, amps)
    }

    pub fn n_electrons(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    fn volume(&self) -> f64 {
        math::powi(self.grid.dx(), self.n as i32)
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        let s: Complex64 = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum();
        s * self.volume()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.volume())
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let nrm = self.norm();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::NonFinite("tensor wave-function norm"));
        }
        let s = 1.0 / nrm;
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(nrm)
    }

    /// max |ψ − sign·P_ij ψ| over the swaps the declared symmetry covers.
    pub fn symmetry_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (perm, sign) in swaps(&self.spins, self.symmetry) {
            let g = self.grid.len();
            let mut coords = alloc::vec![0usize; self.n];
            for (idx, a) in self.amplitudes.iter().enumerate() {
                decompose(idx, g, &mut coords);
                let j = permuted_index(&coords, &perm, g);
                worst = worst.max((a - self.amplitudes[j] * sign).norm());
            }
        }
        worst
    }
}

fn decompose(mut idx: usize, g: usize, coords: &mut [usize]) {
    for c in coords.iter_mut().rev() {
        *c = idx % g;
        idx /= g;
    }
}

fn permuted_index(coords: &[usize], perm: &[usize], g: usize) -> usize {
    perm.iter().fold(0, |acc, &p| acc * g + coords[p])
}

/// Coordinate groups permuted together under a symmetry.
fn blocks(spins: &[Spin], symmetry: Symmetry) -> Vec<Vec<usize>> {
    match symmetry {
        Symmetry::None => Vec::new(),
        Symmetry::Symmetric => alloc::vec![(0..spins.len()).collect()],
        Symmetry::Antisymmetric => [Spin::Up, Spin::Down]
            .iter()
            .map(|s| (0..spins.len()).filter(|&i| spins[i] == *s).collect::<Vec<_>>())
            .filter(|b| b.len() > 1)
            .collect(),
    }
}

fn permutations(items: &[usize]) -> Vec<(Vec<usize>, f64)> {
    if items.len() <= 1 {
        return alloc::vec![(items.to_vec(), 1.0)];
    }
    let mut out = Vec::new();
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (mut tail, s) in permutations(&rest) {
            tail.insert(0, head);
            out.push((tail, sign * s));
        }
    }
    out
}

/// Every group element as a full coordinate map with its character.
fn group(spins: &[Spin], symmetry: Symmetry) -> Vec<(Vec<usize>, f64)> {
    let n = spins.len();
    let mut elems = alloc::vec![((0..n).collect::<Vec<_>>(), 1.0)];
    for block in blocks(spins, symmetry) {
        let mut next = Vec::new();
        for (base, s0) in &elems {
            for (perm, s) in permutations(&block) {
                let mut m = base.clone();
                for (slot, &src) in block.iter().zip(&perm) {
                    m[*slot] = base[src];
                }
                let chi = if symmetry == Symmetry::Antisymmetric { s } else { 1.0 };
                next.push((m, s0 * chi));
            }
        }
        elems = next;
    }
    elems
}

/// Pairwise transpositions inside each block, for checking.
fn swaps(spins: &[Spin], symmetry: Symmetry) -> Vec<(Vec<usize>, f64)> {
    let n = spins.len();
    let sign = if symmetry == Symmetry::Antisymmetric { -1.0 } else { 1.0 };
    let mut out = Vec::new();
    for block in blocks(spins, symmetry) {
        for a in 0..block.len() {
            for b in a + 1..block.len() {
                let mut m: Vec<usize> = (0..n).collect();
                m.swap(block[a], block[b]);
                out.push((m, sign));
            }
        }
    }
    out
}

fn check_electrons(psi: &TensorWavefunction, config: &SystemConfig) -> Result<()> {
    if config.n_electrons() != psi.n || config.grid.len() == 0 {
        return Err(Error::InvalidConfig {
            field: "spins",
            reason: format!("wave function has {} electrons, config {}", psi.n, config.n_electrons()),
        });
    }
    Ok(())
}

/// (1/|G|) Σ_P χ(P)·P ψ followed by renormalization.
pub fn symmetry_project(psi: &TensorWavefunction, symmetry: Symmetry) -> Result<TensorWavefunction> {
    if psi.n > MAX_ELECTRONS {
        return Err(Error::Capacity { required: psi.amplitudes.len(), cap: 0 });
    }
    let mut out = psi.clone();
    out.symmetry = symmetry;
    project_in_place(&mut out, &mut Vec::new())?;
    Ok(out)
}

fn project_in_place(psi: &mut TensorWavefunction, buf: &mut Vec<Complex64>) -> Result<()> {
    let elems = group(&psi.spins, psi.symmetry);
    if elems.len() > 1 {
        let g = psi.grid.len();
        let inv = 1.0 / elems.len() as f64;
        buf.clear();
        buf.resize(psi.amplitudes.len(), Complex64::new(0.0, 0.0));
        let mut coords = alloc::vec![0usize; psi.n];
        for (idx, o) in buf.iter_mut().enumerate() {
            decompose(idx, g, &mut coords);
            let mut acc = Complex64::new(0.0, 0.0);
            for (perm, chi) in &elems {
                acc += psi.amplitudes[permuted_index(&coords, perm, g)] * *chi;
            }
            *o = acc * inv;
        }
        core::mem::swap(&mut psi.amplitudes, buf);
    }
    let nrm = psi.norm();
    if !(nrm > 1e-12) {
        return Err(Error::SymmetryIncompatible);
    }
    psi.amplitudes.iter_mut().for_each(|a| *a /= nrm);
    Ok(())
}

/// Σ_i v_en(x_i) + Σ_{i<j} v_ee(x_i, x_j) at every tensor-grid node.
fn total_potential(config: &SystemConfig, grid: &Grid1D, n: usize, size: usize) -> Vec<f64> {
    let g = grid.len();
    let xs: Vec<f64> = grid.points().collect();
    let v1: Vec<f64> = xs.iter().map(|&x| config.v_en(x)).collect();
    let v2: Vec<f64> = (0..g * g).map(|ab| config.v_ee(xs[ab / g], xs[ab % g])).collect();
    let mut coords = alloc::vec![0usize; n];
    (0..size)
        .map(|idx| {
            decompose(idx, g, &mut coords);
            let mut v = 0.0;
            for i in 0..n {
                v += v1[coords[i]];
                for j in i + 1..n {
                    v += v2[coords[i] * g + coords[j]];
                }
            }
            v
        })
        .collect()
}

/// Calls `f(start, stride)` for every grid line along `axis`.
fn for_each_line(n: usize, g: usize, axis: usize, mut f: impl FnMut(usize, usize)) {
    let stride = g.pow((n - 1 - axis) as u32);
    let outer = g.pow(axis as u32);
    for o in 0..outer {
        for inner in 0..stride {
            f(o * stride * g + inner, stride);
        }
    }
}

/// out += coeff · K_axis ψ with K = −½∇² along the given axis.
fn add_kinetic_axis(
    psi: &[Complex64],
    out: &mut [Complex64],
    n: usize,
    g: usize,
    axis: usize,
    c: [f64; 3],
    reach: usize,
    coeff: f64,
) {
    let c = [c[0] * coeff, c[1] * coeff, c[2] * coeff];
    for_each_line(n, g, axis, |start, stride| {
        for i in 0..g {
            let at = start + i * stride;
            let mut acc = psi[at] * c[0];
            for m in 1..=reach {
                if i >= m {
                    acc += psi[at - m * stride] * c[m];
                }
                if i + m < g {
                    acc += psi[at + m * stride] * c[m];
                }
            }
            out[at] += acc;
        }
    });
}

fn apply_h(
    psi: &[Complex64],
    potential: &[f64],
    n: usize,
    g: usize,
    dx: f64,
    stencil: Stencil,
    out: &mut [Complex64],
) {
    for ((o, p), v) in out.iter_mut().zip(psi).zip(potential) {
        *o = p * v;
    }
    let c = stencil.kinetic_coefficients(dx);
    for axis in 0..n {
        add_kinetic_axis(psi, out, n, g, axis, c, stencil.reach(), 1.0);
    }
}

/// Hψ for the N-electron Hamiltonian of `config`, evaluated matrix-free.
pub fn hamiltonian_apply(psi: &TensorWavefunction, config: &SystemConfig) -> Result<TensorWavefunction> {
    check_electrons(psi, config)?;
    hamiltonian_apply_with(psi, config, Stencil::FivePoint)
}

pub fn hamiltonian_apply_with(
    psi: &TensorWavefunction,
    config: &SystemConfig,
    stencil: Stencil,
) -> Result<TensorWavefunction> {
    let g = psi.grid.len();
    let potential = total_potential(config, &psi.grid, psi.n, psi.amplitudes.len());
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); psi.amplitudes.len()];
    apply_h(&psi.amplitudes, &potential, psi.n, g, psi.grid.dx(), stencil, &mut out);
    Ok(TensorWavefunction { amplitudes: out, ..psi.clone() })
}

/// ⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩.
pub fn energy(psi: &TensorWavefunction, config: &SystemConfig) -> Result<f64> {
    let h = hamiltonian_apply(psi, config)?;
    Ok(psi.inner(&h).re / psi.inner(psi).re)
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub psi: TensorWavefunction,
    pub energy: f64,
    pub steps: usize,
    /// Largest swap violation seen at the periodic checks.
    pub max_symmetry_violation: f64,
}

/// Imaginary-time relaxation of the N-body wave function.
///
/// Each step is exp(−dτV/2) · Π_axes CN_axis(dτ) · exp(−dτV/2) followed by
/// symmetry projection and renormalization. The one-dimensional kinetic
/// factors are Crank-Nicolson solves along every grid line.
pub fn exact_ground_state(
    config: &SystemConfig,
    symmetry: Symmetry,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    config.validate()?;
    let n = config.n_electrons();
    let grid = opts.grid;
    let g = grid.len();
    let size = checked_size(n, g, opts.max_amplitudes)?;
    if !(opts.dtau > 0.0) || opts.check_every == 0 {
        return Err(Error::InvalidConfig { field: "oracle.dtau", reason: "must be positive".into() });
    }
    let levels = config.levels();
    let factors: Vec<Vec<Complex64>> =
        levels.iter().map(|&l| harmonic_orbital(grid, l, config.omega).into_values()).collect();
    let views: Vec<&[Complex64]> = factors.iter().map(|f| f.as_slice()).collect();
    let mut psi = TensorWavefunction::product(grid, config.spins.clone(), symmetry, &views)?;
    let mut buf = Vec::with_capacity(size);
    project_in_place(&mut psi, &mut buf)?;

    let potential = total_potential(config, &grid, n, size);
    let half_decay: Vec<f64> = potential.iter().map(|v| math::exp(-0.5 * opts.dtau * v)).collect();
    let dx = grid.dx();
    let c = opts.stencil.kinetic_coefficients(dx);
    let reach = opts.stencil.reach();
    let half = 0.5 * opts.dtau;
    let mut band = BandedSpd::default();
    band.factor(|_| 1.0 + half * c[0], [0.0, half * c[1], half * c[2]], reach, g);
    let mut line = Vec::with_capacity(g);
    let mut scratch = alloc::vec![Complex64::new(0.0, 0.0); size];

    let energy_of = |psi: &TensorWavefunction, out: &mut Vec<Complex64>| {
        apply_h(&psi.amplitudes, &potential, n, g, dx, opts.stencil, out);
        let num: f64 = psi.amplitudes.iter().zip(out.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        let den: f64 = psi.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        num / den
    };
    let mut last = energy_of(&psi, &mut scratch);
    let mut max_violation: f64 = 0.0;
    for step in 1..=opts.max_steps {
        for (a, d) in psi.amplitudes.iter_mut().zip(&half_decay) {
            *a *= *d;
        }
        for axis in 0..n {
            scratch.copy_from_slice(&psi.amplitudes);
            add_kinetic_axis(&psi.amplitudes, &mut scratch, n, g, axis, c, reach, -half);
            for_each_line(n, g, axis, |start, stride| band.solve_strided(&mut scratch, start, stride, &mut line));
            core::mem::swap(&mut psi.amplitudes, &mut scratch);
        }
        for (a, d) in psi.amplitudes.iter_mut().zip(&half_decay) {
            *a *= *d;
        }
        project_in_place(&mut psi, &mut buf)?;
        if psi.amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::NonFinite("oracle amplitudes"));
        }
        if step % 50 == 0 {
            max_violation = max_violation.max(psi.symmetry_violation());
        }
        if step % opts.check_every == 0 {
            let e = energy_of(&psi, &mut scratch);
            let drift = (e - last).abs() / opts.check_every as f64;
            last = e;
            if drift < opts.tolerance {
                return Ok(OracleResult { psi, energy: e, steps: step, max_symmetry_violation: max_violation });
            }
        }
    }
    Err(Error::NoConvergence { steps: opts.max_steps, energy_trace: alloc::vec![last] })
}

/// ρ(x, x') = ∫ ψ*(…, x, …) ψ(…, x', …) over all coordinates but `electron`,
/// trace-normalized.
pub fn exact_one_body_rdm(psi: &TensorWavefunction, electron: usize) -> Result<DensityMatrix> {
    if electron >= psi.n {
        return Err(Error::InvalidConfig { field: "electron", reason: format!("index {electron} out of range") });
    }
    let g = psi.grid.len();
    let stride = g.pow((psi.n - 1 - electron) as u32);
    let outer = g.pow(electron as u32);
    let mut rho = alloc::vec![Complex64::new(0.0, 0.0); g * g];
    for o in 0..outer {
        for inner in 0..stride {
            let start = o * stride * g + inner;
            for a in 0..g {
                let ca = psi.amplitudes[start + a * stride].conj();
                if ca.norm_sqr() == 0.0 {
                    continue;
                }
                for b in a..g {
                    rho[a * g + b] += ca * psi.amplitudes[start + b * stride];
                }
            }
        }
    }
    for a in 0..g {
        for b in 0..a {
            rho[a * g + b] = rho[b * g + a].conj();
        }
        rho[a * g + a] = Complex64::new(rho[a * g + a].re, 0.0);
    }
    let mut dm = DensityMatrix::new(psi.grid, rho);
    dm.normalize()?;
    Ok(dm)
}
