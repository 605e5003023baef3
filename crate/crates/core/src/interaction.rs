// Quadrature-weighted pair-interaction table W[a][b] = v_ee(x_a, x_b)·w_b, so
// that ∫ v_ee(x_a, x') f(x') dx' ≈ Σ_b W[a][b] f_b.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::math;
use crate::model::SystemConfig;

#[derive(Debug, Clone)]
pub(crate) struct Interaction {
    n: usize,
    weighted: Vec<f64>,
    /// v_ee(x_a, x_b) without quadrature weights.
    raw: Vec<f64>,
}

impl Interaction {
    pub fn new(config: &SystemConfig) -> Self {
        let g = config.grid;
        let n = g.len();
        let raw = config.interaction_matrix();
        let mut weighted = raw.clone();
        for a in 0..n {
            for b in 0..n {
                weighted[a * n + b] *= g.weight(b);
            }
        }
        Self { n, weighted, raw }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn raw_row(&self, a: usize) -> &[f64] {
        &self.raw[a * self.n..(a + 1) * self.n]
    }

    pub fn apply_real(&self, f: &[f64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            let row = &self.weighted[a * self.n..(a + 1) * self.n];
            *o = math::dot(row, f);
        }
    }

    /// Complex input split into real and imaginary parts to keep the inner
    /// loop on plain `f64` slices.
    pub fn apply_split(&self, re: &[f64], im: &[f64], out: &mut [Complex64]) {
        for (a, o) in out.iter_mut().enumerate() {
            let row = &self.weighted[a * self.n..(a + 1) * self.n];
            *o = Complex64::new(math::dot(row, re), math::dot(row, im));
        }
    }

    /// ∫ v_ee(x, x') p(x') dx' for p = f·g*, skipping the range where the
    /// product vanishes. Real inputs take a single real pass.
    pub fn convolve_product_support(&self, f: &[Complex64], g: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        let mut peak: f64 = 0.0;
        let mut real = true;
        let mut p = alloc::vec![Complex64::new(0.0, 0.0); n];
        for ((q, a), b) in p.iter_mut().zip(f).zip(g) {
            *q = a * b.conj();
            peak = peak.max(q.norm_sqr());
            real &= q.im == 0.0;
        }
        let floor = peak * 1e-30;
        let lo = p.iter().position(|q| q.norm_sqr() > floor);
        let Some(lo) = lo else {
            out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
            return;
        };
        let hi = p.iter().rposition(|q| q.norm_sqr() > floor).unwrap_or(lo) + 1;
        let pr: Vec<f64> = p[lo..hi].iter().map(|q| q.re).collect();
        let pi: Vec<f64> = if real { Vec::new() } else { p[lo..hi].iter().map(|q| q.im).collect() };
        for (a, o) in out.iter_mut().enumerate() {
            let row = &self.weighted[a * n + lo..a * n + hi];
            let im = if real { 0.0 } else { math::dot(row, &pi) };
            *o = Complex64::new(math::dot(row, &pr), im);
        }
    }

    /// ∫ v_ee(x, x') p(x') dx' for p = f·g* at every grid point.
    pub fn convolve_product(
        &self,
        f: &[Complex64],
        g: &[Complex64],
        scratch: &mut (Vec<f64>, Vec<f64>),
        out: &mut [Complex64],
    ) {
        let (re, im) = scratch;
        re.clear();
        im.clear();
        for (a, b) in f.iter().zip(g) {
            let p = a * b.conj();
            re.push(p.re);
            im.push(p.im);
        }
        self.apply_split(re, im, out);
    }
}
