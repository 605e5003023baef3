//! One-body reduced density matrices and linear entropies over a family of
//! guide waves.
//!
//! Convention: ρ(x, x') = ⟨φ*(x) φ(x')⟩, traces and matrix products use the
//! trapezoidal weights of the grid so that Tr ρ = ∫ ρ(x, x) dx.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::engine::GuideWaveSet;
use crate::model::Spin;
use crate::numerics::{Grid1D, Orbital};
use crate::{math, Error, Result};

/// Orthonormality error above which the identical-particle RDM switches to
/// the overlap-matrix formula.
pub const ORTHONORMALITY_FALLBACK: f64 = 1e-6;

/// G×G complex one-body density matrix on a grid (row-major, ρ[a][b] =
/// ρ(x_a, x_b)).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    grid: Grid1D,
    rho: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn new(grid: Grid1D, rho: Vec<Complex64>) -> Self {
        assert_eq!(rho.len(), grid.len() * grid.len());
        Self { grid, rho }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.rho[a * self.grid.len() + b]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.rho
    }

    /// ∫ ρ(x, x) dx.
    pub fn trace(&self) -> Complex64 {
        (0..self.len()).map(|a| self.get(a, a) * self.grid.weight(a)).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let t = self.trace().re;
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::NonFinite("density-matrix trace"));
        }
        let s = 1.0 / t;
        self.rho.iter_mut().for_each(|r| *r *= s);
        Ok(())
    }

    /// ∫∫ ρ(x, x') ρ(x', x) dx dx'.
    pub fn purity(&self) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for a in 0..n {
            let wa = self.grid.weight(a);
            for b in 0..n {
                acc += wa * self.grid.weight(b) * (self.get(a, b) * self.get(b, a)).re;
            }
        }
        acc
    }

    /// max |ρ − ρ†|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }

    /// True when the smallest eigenvalue of the quadrature-weighted operator
    /// exceeds −`tolerance`, decided by a Cholesky factorization of
    /// W^{1/2} ρ W^{1/2} + tolerance·I.
    pub fn is_positive_semidefinite(&self, tolerance: f64) -> bool {
        let n = self.len();
        let sw: Vec<f64> = (0..n).map(|a| math::sqrt(self.grid.weight(a))).collect();
        // Hermitian part, lower triangle used.
        let mut m: Vec<Complex64> = alloc::vec![Complex64::new(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..=a {
                let h = (self.get(a, b) + self.get(b, a).conj()) * 0.5;
                m[a * n + b] = h * sw[a] * sw[b];
            }
            m[a * n + a] += tolerance;
        }
        for j in 0..n {
            let mut d = m[j * n + j].re;
            for k in 0..j {
                d -= m[j * n + k].norm_sqr();
            }
            if !(d > 0.0) {
                return false;
            }
            let d = math::sqrt(d);
            m[j * n + j] = Complex64::new(d, 0.0);
            for i in j + 1..n {
                let mut v = m[i * n + j];
                for k in 0..j {
                    v -= m[i * n + k] * m[j * n + k].conj();
                }
                m[i * n + j] = v / d;
            }
        }
        true
    }

    /// Hermitian to 1e-10, unit trace to 1e-10 and positive semidefinite to
    /// 1e-8.
    pub fn check_properties(&self) -> RdmCheck {
        RdmCheck {
            hermiticity_error: self.hermiticity_error(),
            trace_error: (self.trace() - 1.0).norm(),
            positive_semidefinite: self.is_positive_semidefinite(1e-8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdmCheck {
    pub hermiticity_error: f64,
    pub trace_error: f64,
    pub positive_semidefinite: bool,
}

impl RdmCheck {
    pub fn passes(&self) -> bool {
        self.hermiticity_error <= 1e-10 && self.trace_error <= 1e-10 && self.positive_semidefinite
    }
}

/// Accumulates (1/count)·Σ φ*(x) φ(x') over amplitude vectors (upper
/// triangle, mirrored at the end).
struct RdmAccumulator {
    n: usize,
    acc: Vec<Complex64>,
    count: f64,
}

impl RdmAccumulator {
    fn new(n: usize) -> Self {
        Self { n, acc: alloc::vec![Complex64::new(0.0, 0.0); n * n], count: 0.0 }
    }

    fn add(&mut self, phi: &[Complex64], weight: f64) {
        let n = self.n;
        for a in 0..n {
            let ca = phi[a].conj() * weight;
            if ca.norm_sqr() == 0.0 {
                continue;
            }
            let row = &mut self.acc[a * n..(a + 1) * n];
            for b in a..n {
                row[b] += ca * phi[b];
            }
        }
    }

    fn finish(mut self, grid: Grid1D) -> Result<DensityMatrix> {
        let n = self.n;
        if self.count > 0.0 {
            let s = 1.0 / self.count;
            self.acc.iter_mut().for_each(|v| *v *= s);
        }
        for a in 0..n {
            for b in 0..a {
                self.acc[a * n + b] = self.acc[b * n + a].conj();
            }
            let d = self.acc[a * n + a];
            self.acc[a * n + a] = Complex64::new(d.re, 0.0);
        }
        let mut rho = DensityMatrix::new(grid, self.acc);
        rho.normalize()?;
        Ok(rho)
    }
}

/// ρ_i(x, x') = (1/M) Σ_k φ_i^k*(x) φ_i^k(x') over the replicas of one
/// electron, trace-normalized.
pub fn rdm_distinguishable(replicas: &[&Orbital]) -> Result<DensityMatrix> {
    let first = replicas.first().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    let grid = *first.grid();
    let mut acc = RdmAccumulator::new(grid.len());
    for phi in replicas {
        if *phi.grid() != grid {
            return Err(Error::GridMismatch);
        }
        acc.add(phi.values(), 1.0);
        acc.count += 1.0;
    }
    acc.finish(grid)
}

/// 1 − Tr ρ².
pub fn linear_entropy_distinguishable(rho: &DensityMatrix) -> f64 {
    1.0 - rho.purity()
}

/// Identical-particle entropy 1 − N·Tr ρ². Noise can push it slightly below
/// zero; the clamped value is reported alongside the raw one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdenticalEntropy {
    pub value: f64,
    pub raw: f64,
}

pub fn linear_entropy_identical(rho: &DensityMatrix, n_same_spin: usize) -> IdenticalEntropy {
    let raw = 1.0 - n_same_spin as f64 * rho.purity();
    IdenticalEntropy { value: raw.max(0.0), raw }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlaterRdmDiagnostics {
    /// Replica sets that failed the orthonormality check and went through
    /// the overlap-matrix formula.
    pub fallbacks: usize,
    pub max_orthonormality_error: f64,
}

/// One-body RDM of the spin-`spin` Slater determinant built from each
/// replica set, averaged over replicas and trace-normalized.
///
/// `replica_sets[k][i]` is orbital i of replica k; only orbitals whose label
/// in `spins` equals `spin` enter the determinant.
pub fn rdm_identical(
    spin: Spin,
    replica_sets: &[Vec<&Orbital>],
    spins: &[Spin],
) -> Result<(DensityMatrix, SlaterRdmDiagnostics)> {
    let members: Vec<usize> = (0..spins.len()).filter(|&i| spins[i] == spin).collect();
    if members.is_empty() {
        return Err(Error::InvalidConfig { field: "spins", reason: "no electron carries this spin".into() });
    }
    let first = replica_sets.first().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    let grid = *first[members[0]].grid();
    let n = grid.len();
    let mut acc = RdmAccumulator::new(n);
    let mut diag = SlaterRdmDiagnostics::default();
    for set in replica_sets {
        let orbs: Vec<&Orbital> = members.iter().map(|&i| set[i]).collect();
        if orbs.iter().any(|o| *o.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        let s = overlap(&orbs);
        let m = orbs.len();
        let err = (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| (s[i * m + j] - if i == j { 1.0 } else { 0.0 }).norm())
            .fold(0.0, f64::max);
        diag.max_orthonormality_error = diag.max_orthonormality_error.max(err);
        let inv_m = 1.0 / m as f64;
        if err <= ORTHONORMALITY_FALLBACK {
            for o in &orbs {
                acc.add(o.values(), inv_m);
            }
        } else {
            diag.fallbacks += 1;
            // ρ(x,x') = (1/N) Σ_ij φ_i*(x) (S⁻¹)_ji φ_j(x'), exact for the
            // normalized determinant of non-orthonormal orbitals.
            let inv = invert(&s, m).ok_or(Error::Degenerate { index: 0, residual: 0.0 })?;
            // Orthonormal combinations ψ = φ·C with C C† = S⁻¹ (Cholesky).
            let c = cholesky(&inv, m).ok_or(Error::Degenerate { index: 0, residual: 0.0 })?;
            for a in 0..m {
                let psi: Vec<Complex64> = (0..n)
                    .map(|x| (0..m).map(|i| orbs[i].values()[x] * c[i * m + a]).sum())
                    .collect();
                acc.add(&psi, inv_m);
            }
        }
        acc.count += 1.0;
    }
    Ok((acc.finish(grid)?, diag))
}

/// [`rdm_distinguishable`] over the replicas of electron `i`.
pub fn guide_rdm_distinguishable(i: usize, guides: &GuideWaveSet) -> Result<DensityMatrix> {
    let replicas: Vec<&Orbital> = guides.electron(i).iter().collect();
    rdm_distinguishable(&replicas)
}

/// [`rdm_identical`] over every replica of the guide family.
pub fn guide_rdm_identical(
    spin: Spin,
    guides: &GuideWaveSet,
    spins: &[Spin],
) -> Result<(DensityMatrix, SlaterRdmDiagnostics)> {
    let sets: Vec<Vec<&Orbital>> = (0..guides.n_walkers()).map(|k| guides.replica(k)).collect();
    rdm_identical(spin, &sets, spins)
}

fn overlap(orbs: &[&Orbital]) -> Vec<Complex64> {
    let m = orbs.len();
    let mut s = alloc::vec![Complex64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            // S_ij = ∫ φ_i* φ_j
            s[i * m + j] = crate::numerics::inner_product(orbs[j], orbs[i]).unwrap_or_default();
        }
    }
    s
}

fn invert(a: &[Complex64], m: usize) -> Option<Vec<Complex64>> {
    let mut w = a.to_vec();
    let mut inv: Vec<Complex64> =
        (0..m * m).map(|k| Complex64::new(if k / m == k % m { 1.0 } else { 0.0 }, 0.0)).collect();
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| w[x * m + col].norm().total_cmp(&w[y * m + col].norm()))?;
        if w[piv * m + col].norm() < 1e-14 {
            return None;
        }
        for k in 0..m {
            w.swap(col * m + k, piv * m + k);
            inv.swap(col * m + k, piv * m + k);
        }
        let p = w[col * m + col];
        for k in 0..m {
            w[col * m + k] /= p;
            inv[col * m + k] /= p;
        }
        for r in 0..m {
            if r != col {
                let f = w[r * m + col];
                for k in 0..m {
                    let (wc, ic) = (w[col * m + k], inv[col * m + k]);
                    w[r * m + k] -= f * wc;
                    inv[r * m + k] -= f * ic;
                }
            }
        }
    }
    Some(inv)
}

/// Lower-triangular L with L L† = A for Hermitian positive-definite A.
fn cholesky(a: &[Complex64], m: usize) -> Option<Vec<Complex64>> {
    let mut l = alloc::vec![Complex64::new(0.0, 0.0); m * m];
    for j in 0..m {
        let mut d = a[j * m + j].re;
        for k in 0..j {
            d -= l[j * m + k].norm_sqr();
        }
        if d <= 0.0 {
            return None;
        }
        let d = math::sqrt(d);
        l[j * m + j] = Complex64::new(d, 0.0);
        for i in j + 1..m {
            let mut v = a[i * m + j];
            for k in 0..j {
                v -= l[i * m + k] * l[j * m + k].conj();
            }
            l[i * m + j] = v / d;
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::harmonic_orbital;
    use crate::numerics::gram_schmidt;
    use proptest::prelude::*;

    fn grid64() -> Grid1D {
        Grid1D::symmetric(7.0, 64).unwrap()
    }

    #[test]
    fn single_replica_is_pure() {
        let g = grid64();
        let phi = harmonic_orbital(g, 1, 1.0);
        let rho = rdm_distinguishable(&[&phi]).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-10);
        assert!(linear_entropy_distinguishable(&rho).abs() < 1e-10);
        assert!(rho.check_properties().passes());
    }

    #[test]
    fn identical_replicas_are_pure() {
        let g = grid64();
        let phi = harmonic_orbital(g, 0, 1.0);
        let rho = rdm_distinguishable(&[&phi, &phi, &phi]).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mixtures_of_orthogonal_states() {
        let g = grid64();
        let orbs: Vec<Orbital> = (0..4).map(|n| harmonic_orbital(g, n, 1.0)).collect();
        for d in 1..=4 {
            let refs: Vec<&Orbital> = orbs[..d].iter().collect();
            let rho = rdm_distinguishable(&refs).unwrap();
            let s = linear_entropy_distinguishable(&rho);
            assert!((s - (1.0 - 1.0 / d as f64)).abs() < 1e-9, "d={d}: {s}");
            assert!(rho.check_properties().passes());
        }
    }

    #[test]
    fn slater_rank_one_has_zero_identical_entropy() {
        let g = grid64();
        let orbs: Vec<Orbital> = (0..3).map(|n| harmonic_orbital(g, n, 1.0)).collect();
        let spins = [Spin::Up; 3];
        for m in 2..=3 {
            let set: Vec<&Orbital> = orbs[..m].iter().collect();
            let (rho, diag) = rdm_identical(Spin::Up, &[set.clone(), set], &spins[..m]).unwrap();
            assert_eq!(diag.fallbacks, 0);
            assert!((rho.purity() - 1.0 / m as f64).abs() < 1e-10);
            assert!(linear_entropy_identical(&rho, m).raw.abs() < 1e-8);
            // Distinguishable measure keeps the antisymmetrization offset.
            assert!((linear_entropy_distinguishable(&rho) - (1.0 - 1.0 / m as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_same_spin_electron_reduces_to_distinguishable() {
        let g = grid64();
        let a = harmonic_orbital(g, 0, 1.0);
        let b = harmonic_orbital(g, 0, 1.3);
        let spins = [Spin::Up, Spin::Down];
        let (rho, _) = rdm_identical(Spin::Down, &[alloc::vec![&a, &a], alloc::vec![&a, &b]], &spins).unwrap();
        let plain = rdm_distinguishable(&[&a, &b]).unwrap();
        assert!(
            (linear_entropy_identical(&rho, 1).raw - linear_entropy_distinguishable(&plain)).abs() < 1e-12
        );
    }

    /// Explicit ∫ D*(x, y) D(x', y) dy for the normalized two-orbital
    /// determinant D(x, y) = [a(x) b(y) − b(x) a(y)] / √2.
    fn explicit_two_body_rdm(a: &Orbital, b: &Orbital) -> Vec<Complex64> {
        let g = *a.grid();
        let n = g.len();
        let d = |x: usize, y: usize| {
            (a.values()[x] * b.values()[y] - b.values()[x] * a.values()[y]) / math::sqrt(2.0)
        };
        let mut rho = alloc::vec![Complex64::new(0.0, 0.0); n * n];
        for x in 0..n {
            for xp in 0..n {
                rho[x * n + xp] = (0..n).map(|y| d(x, y).conj() * d(xp, y) * g.weight(y)).sum();
            }
        }
        // Normalize by the quadrature trace (2-body norm is 1 up to quadrature).
        let tr: Complex64 = (0..n).map(|x| rho[x * n + x] * g.weight(x)).sum();
        rho.iter_mut().for_each(|r| *r /= tr);
        rho
    }

    #[test]
    fn closed_form_matches_explicit_integral() {
        let g = grid64();
        let raw = [
            Orbital::from_fn(g, |x| Complex64::new(math::exp(-0.5 * x * x), 0.1 * x * math::exp(-0.3 * x * x))),
            Orbital::from_fn(g, |x| Complex64::new(x * math::exp(-0.6 * x * x), 0.2 * math::exp(-x * x))),
        ];
        let orbs = gram_schmidt(&raw).unwrap();
        let spins = [Spin::Up, Spin::Up];
        let (rho, _) = rdm_identical(Spin::Up, &[orbs.iter().collect()], &spins).unwrap();
        let explicit = explicit_two_body_rdm(&orbs[0], &orbs[1]);
        let worst = rho.entries().iter().zip(&explicit).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst <= 1e-8, "max entry difference {worst}");
    }

    #[test]
    fn rotated_replica_entropy_matches_brute_force() {
        let g = grid64();
        let p: Vec<Orbital> = (0..3).map(|n| harmonic_orbital(g, n, 1.0)).collect();
        // Replica 2: top orbital rotated toward level 2.
        let (c, s) = (math::cos(0.4), math::sin(0.4));
        let rotated = Orbital::new(
            g,
            p[1].values().iter().zip(p[2].values()).map(|(a, b)| a * c + b * s).collect(),
        );
        let spins = [Spin::Up, Spin::Up];
        let sets = [alloc::vec![&p[0], &p[1]], alloc::vec![&p[0], &rotated]];
        let (rho, _) = rdm_identical(Spin::Up, &sets, &spins).unwrap();
        let got = linear_entropy_identical(&rho, 2).raw;
        let e1 = explicit_two_body_rdm(&p[0], &p[1]);
        let e2 = explicit_two_body_rdm(&p[0], &rotated);
        let avg: Vec<Complex64> = e1.iter().zip(&e2).map(|(a, b)| (a + b) * 0.5).collect();
        let brute = DensityMatrix::new(g, avg);
        let want = 1.0 - 2.0 * brute.purity();
        assert!(got > 1e-3);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn non_orthonormal_sets_use_overlap_formula() {
        let g = grid64();
        let a = harmonic_orbital(g, 0, 1.0);
        let b = harmonic_orbital(g, 1, 1.0);
        // Same determinant (up to scale) with a skewed basis.
        let skew = Orbital::new(g, a.values().iter().zip(b.values()).map(|(x, y)| x * 0.3 + y * 2.0).collect());
        let spins = [Spin::Up, Spin::Up];
        let (ortho, d0) = rdm_identical(Spin::Up, &[alloc::vec![&a, &b]], &spins).unwrap();
        let (skewed, d1) = rdm_identical(Spin::Up, &[alloc::vec![&a, &skew]], &spins).unwrap();
        assert_eq!((d0.fallbacks, d1.fallbacks), (0, 1));
        let worst = ortho.entries().iter().zip(skewed.entries()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-10);
    }

    #[test]
    fn negative_eigenvalue_is_detected() {
        let g = grid64();
        let a = harmonic_orbital(g, 0, 1.0);
        let b = harmonic_orbital(g, 1, 1.0);
        let n = g.len();
        let mut rho = alloc::vec![Complex64::new(0.0, 0.0); n * n];
        for x in 0..n {
            for y in 0..n {
                rho[x * n + y] = a.values()[x] * a.values()[y] * 1.5 - b.values()[x] * b.values()[y] * 0.5;
            }
        }
        let rho = DensityMatrix::new(g, rho);
        assert!(!rho.is_positive_semidefinite(1e-8));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn global_phase_does_not_change_entropies(theta in 0.0f64..6.3, mix in 0.05f64..0.9) {
            let g = Grid1D::symmetric(6.0, 32).unwrap();
            let a = harmonic_orbital(g, 0, 1.0);
            let b = harmonic_orbital(g, 1, 1.0);
            let c = Orbital::new(g, a.values().iter().zip(b.values()).map(|(x, y)| x + y * mix).collect())
                .normalized().unwrap();
            let mut c_rot = c.clone();
            c_rot.scale(Complex64::new(math::cos(theta), math::sin(theta)));
            let s1 = linear_entropy_distinguishable(&rdm_distinguishable(&[&a, &c]).unwrap());
            let s2 = linear_entropy_distinguishable(&rdm_distinguishable(&[&a, &c_rot]).unwrap());
            prop_assert!((s1 - s2).abs() < 1e-12);
        }

        #[test]
        fn mixing_in_a_distinct_replica_never_lowers_entropy(copies in 1usize..6, mix in 0.05f64..2.0) {
            let g = Grid1D::symmetric(6.0, 32).unwrap();
            let a = harmonic_orbital(g, 0, 1.0);
            let b = harmonic_orbital(g, 1, 1.0);
            let c = Orbital::new(g, a.values().iter().zip(b.values()).map(|(x, y)| x + y * mix).collect())
                .normalized().unwrap();
            let mut family: Vec<&Orbital> = core::iter::repeat(&a).take(copies).collect();
            let before = linear_entropy_distinguishable(&rdm_distinguishable(&family).unwrap());
            family.push(&c);
            let after = linear_entropy_distinguishable(&rdm_distinguishable(&family).unwrap());
            prop_assert!(after >= before - 1e-12);
        }
    }
}
