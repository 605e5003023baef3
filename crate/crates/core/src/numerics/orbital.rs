use alloc::vec::Vec;

use num_complex::Complex64;

use super::Grid1D;
use crate::{math, Error, Result};

/// Complex one-body wave function sampled on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Orbital {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl Orbital {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.len(), "orbital length must match grid");
        Self { grid, values }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: alloc::vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_real(grid: Grid1D, values: &[f64]) -> Self {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn from_real_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self::new(grid, grid.points().map(|x| Complex64::new(f(x), 0.0)).collect())
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        let g = &self.grid;
        self.values.iter().enumerate().map(|(i, v)| g.weight(i) * v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_sqr())
    }

    /// Rescales to unit norm. A zero orbital is left untouched and reported.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !n.is_finite() {
            return Err(Error::NonFinite("orbital norm"));
        }
        if n == 0.0 {
            return Err(Error::Degenerate { index: 0, residual: 0.0 });
        }
        let s = 1.0 / n;
        self.values.iter_mut().for_each(|v| *v *= s);
        Ok(n)
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn scale(&mut self, s: Complex64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn max_abs(&self) -> f64 {
        math::sqrt(self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest pointwise |a − b|.
    pub fn max_diff(&self, other: &Orbital) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Linear interpolation; zero outside the box.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        match self.grid.locate(x) {
            Some((i, t)) => self.values[i] * (1.0 - t) + self.values[i + 1] * t,
            None => Complex64::new(0.0, 0.0),
        }
    }

    #[inline]
    fn node(&self, i: isize) -> Complex64 {
        if i < 0 || i as usize >= self.values.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[i as usize]
        }
    }

    /// Fourth-order central first derivative at node `i`.
    #[inline]
    fn node_gradient(&self, i: isize) -> Complex64 {
        let f = |o: isize| self.node(i + o);
        (f(-2) - f(2) + (f(1) - f(-1)) * 8.0) / (12.0 * self.grid.dx())
    }

    /// Five-point second derivative at node `i`.
    #[inline]
    fn node_laplacian(&self, i: isize) -> Complex64 {
        let f = |o: isize| self.node(i + o);
        (-(f(-2) + f(2)) + (f(-1) + f(1)) * 16.0 - f(0) * 30.0) / (12.0 * self.grid.dx() * self.grid.dx())
    }

    /// Value and first derivative at `x` from the cubic Hermite interpolant
    /// through the two enclosing nodes, with fourth-order nodal slopes.
    /// `None` outside the box.
    pub fn sample_with_gradient(&self, x: f64) -> Option<(Complex64, Complex64)> {
        let (c, t) = self.grid.locate(x)?;
        let (c, h) = (c as isize, self.grid.dx());
        let (f0, f1) = (self.node(c), self.node(c + 1));
        let (d0, d1) = (self.node_gradient(c) * h, self.node_gradient(c + 1) * h);
        let (t2, t3) = (t * t, t * t * t);
        let value = f0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + d0 * (t3 - 2.0 * t2 + t)
            + f1 * (-2.0 * t3 + 3.0 * t2)
            + d1 * (t3 - t2);
        let slope = (f0 * (6.0 * t2 - 6.0 * t)
            + d0 * (3.0 * t2 - 4.0 * t + 1.0)
            + f1 * (-6.0 * t2 + 6.0 * t)
            + d1 * (3.0 * t2 - 2.0 * t))
            / h;
        Some((value, slope))
    }

    /// ∇²φ at `x`: Catmull-Rom interpolation of the five-point nodal
    /// Laplacian. `None` outside the box.
    pub fn laplacian_at(&self, x: f64) -> Option<Complex64> {
        let (c, t) = self.grid.locate(x)?;
        let w = catmull_rom_weights(t);
        let c = c as isize;
        Some((0..4).map(|m| self.node_laplacian(c - 1 + m as isize) * w[m]).sum())
    }

    /// Central-difference first derivative at the nodes (zero ghost values).
    pub fn gradient_values(&self) -> Vec<Complex64> {
        let n = self.values.len();
        let h = 0.5 / self.grid.dx();
        let zero = Complex64::new(0.0, 0.0);
        (0..n)
            .map(|i| {
                let l = if i == 0 { zero } else { self.values[i - 1] };
                let r = if i + 1 == n { zero } else { self.values[i + 1] };
                (r - l) * h
            })
            .collect()
    }
}

/// Weights of nodes c−1, c, c+1, c+2 for a Catmull-Rom spline at offset t
/// inside cell c.
#[inline]
pub(crate) fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let (t2, t3) = (t * t, t * t * t);
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Three-point second derivative with zero-Dirichlet ghost points.
pub fn laplacian_values(values: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = values.len();
    let inv = 1.0 / (dx * dx);
    let zero = Complex64::new(0.0, 0.0);
    (0..n)
        .map(|i| {
            let l = if i == 0 { zero } else { values[i - 1] };
            let r = if i + 1 == n { zero } else { values[i + 1] };
            (l + r - values[i] * 2.0) * inv
        })
        .collect()
}

/// Five-point (fourth-order) second derivative with two zero ghost points on
/// each side.
pub fn laplacian_five_point_values(values: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = values.len() as isize;
    let inv = 1.0 / (12.0 * dx * dx);
    let at = |i: isize| {
        if i < 0 || i >= n {
            Complex64::new(0.0, 0.0)
        } else {
            values[i as usize]
        }
    };
    (0..n)
        .map(|i| {
            (-(at(i - 2) + at(i + 2)) + (at(i - 1) + at(i + 1)) * 16.0 - at(i) * 30.0) * inv
        })
        .collect()
}

/// ∇²φ on the orbital's grid.
pub fn laplacian(phi: &Orbital) -> Orbital {
    Orbital::new(phi.grid, laplacian_values(&phi.values, phi.grid.dx()))
}

/// Trapezoidal ∫ φ χ* dx.
pub fn inner_product(phi: &Orbital, chi: &Orbital) -> Result<Complex64> {
    if phi.grid != chi.grid {
        return Err(Error::GridMismatch);
    }
    Ok(dot_weighted(&phi.grid, &phi.values, &chi.values))
}

#[inline]
pub(crate) fn dot_weighted(grid: &Grid1D, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let n = a.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 1..n - 1 {
        acc += a[i] * b[i].conj();
    }
    acc += (a[0] * b[0].conj() + a[n - 1] * b[n - 1].conj()) * 0.5;
    acc * grid.dx()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::harmonic_orbital;

    fn gaussian(grid: Grid1D) -> Orbital {
        Orbital::from_real_fn(grid, |x| math::exp(-0.5 * x * x))
    }

    #[test]
    fn laplacian_of_constant_vanishes_inside() {
        let g = Grid1D::symmetric(2.0, 21).unwrap();
        let phi = Orbital::from_real_fn(g, |_| 3.5);
        let lap = laplacian(&phi);
        for v in &lap.values()[1..20] {
            assert!(v.norm() < 1e-10);
        }
    }

    #[test]
    fn laplacian_exact_on_quadratic() {
        let g = Grid1D::symmetric(2.0, 21).unwrap();
        let phi = Orbital::from_real_fn(g, |x| x * x);
        let lap = laplacian(&phi);
        for v in &lap.values()[1..20] {
            assert!((v.re - 2.0).abs() < 1e-10, "{v}");
        }
    }

    fn gaussian_laplacian_error(n: usize) -> (f64, f64) {
        let g = Grid1D::symmetric(6.0, n).unwrap();
        let phi = gaussian(g);
        let lap = laplacian(&phi);
        let err = (1..n - 1)
            .map(|i| {
                let x = g.x(i);
                (lap.values()[i].re - (x * x - 1.0) * math::exp(-0.5 * x * x)).abs()
            })
            .fold(0.0, f64::max);
        (g.dx(), err)
    }

    #[test]
    fn laplacian_second_order_on_gaussian() {
        // Halving dx each time: observed order log2(e_h / e_{h/2}).
        let (_, e1) = gaussian_laplacian_error(61);
        let (_, e2) = gaussian_laplacian_error(121);
        let (_, e3) = gaussian_laplacian_error(241);
        let p1 = math::ln(e1 / e2) / core::f64::consts::LN_2;
        let p2 = math::ln(e2 / e3) / core::f64::consts::LN_2;
        assert!(p1 >= 1.9 && p2 >= 1.9, "orders {p1} {p2}");
    }

    #[test]
    fn five_point_is_fourth_order() {
        let err = |n: usize| {
            let g = Grid1D::symmetric(6.0, n).unwrap();
            let phi = gaussian(g);
            let lap = laplacian_five_point_values(phi.values(), g.dx());
            (2..n - 2)
                .map(|i| {
                    let x = g.x(i);
                    (lap[i].re - (x * x - 1.0) * math::exp(-0.5 * x * x)).abs()
                })
                .fold(0.0, f64::max)
        };
        let p = math::ln(err(61) / err(121)) / core::f64::consts::LN_2;
        assert!(p > 3.8, "order {p}");
    }

    #[test]
    fn local_samples_of_a_gaussian() {
        let g = Grid1D::default();
        let phi = gaussian(g);
        for x in [-2.3, -0.51, 0.0, 0.5, 1.77] {
            let (v, d) = phi.sample_with_gradient(x).unwrap();
            let exact = math::exp(-0.5 * x * x);
            assert!((v.re - exact).abs() < 5e-7, "value at {x}");
            assert!((d.re + x * exact).abs() < 1e-5, "slope at {x}");
            let lap = phi.laplacian_at(x).unwrap();
            assert!((lap.re - (x * x - 1.0) * exact).abs() < 1e-4, "laplacian at {x}");
        }
        assert!(phi.sample_with_gradient(8.5).is_none());
        let w = catmull_rom_weights(0.3);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inner_product_normalization_and_parity() {
        let g = Grid1D::default();
        let p0 = harmonic_orbital(g, 0, 1.0);
        let p1 = harmonic_orbital(g, 1, 1.0);
        assert!((inner_product(&p0, &p0).unwrap().re - 1.0).abs() < 1e-12);
        assert!(inner_product(&p0, &p1).unwrap().norm() < 1e-10);
    }

    #[test]
    fn inner_product_conjugate_symmetric() {
        let g = Grid1D::symmetric(3.0, 32).unwrap();
        let a = Orbital::from_fn(g, |x| Complex64::new(math::cos(x), x * 0.3));
        let b = Orbital::from_fn(g, |x| Complex64::new(x * x, math::sin(2.0 * x)));
        let ab = inner_product(&a, &b).unwrap();
        let ba = inner_product(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-14);
    }

    #[test]
    fn inner_product_rejects_grid_mismatch() {
        let a = Orbital::zeros(Grid1D::symmetric(3.0, 32).unwrap());
        let b = Orbital::zeros(Grid1D::symmetric(3.0, 33).unwrap());
        assert_eq!(inner_product(&a, &b), Err(Error::GridMismatch));
    }

    #[test]
    fn shifted_overlap_matches_fine_quadrature() {
        // Oracle: the same continuous integrand on a 64x finer grid with
        // Simpson's rule. The coarse result is the trapezoid value of the
        // sampled functions, so compare against the trapezoid on the
        // sampled nodes computed independently.
        let g = Grid1D::default();
        let dx = g.dx();
        let f0 = |x: f64| math::exp(-0.5 * x * x) / math::sqrt(math::sqrt(math::PI));
        let a = Orbital::from_real_fn(g, f0);
        let b = Orbital::from_real_fn(g, |x| f0(x - dx));
        let got = inner_product(&a, &b).unwrap().re;
        // ∫ φ0(x) φ0(x − d) dx = exp(−d²/4)
        let n = 64 * 255 + 1;
        let h = 16.0 / (n - 1) as f64;
        let mut s = 0.0;
        for i in 0..n {
            let x = -8.0 + i as f64 * h;
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * f0(x) * f0(x - dx);
        }
        s *= h / 3.0;
        assert!((got - s).abs() < 1e-8, "{got} vs {s}");
        assert!((s - math::exp(-dx * dx / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn interpolation_and_gradient() {
        let g = Grid1D::symmetric(4.0, 401).unwrap();
        let phi = Orbital::from_real_fn(g, |x| 2.0 * x + 1.0);
        assert!((phi.interpolate(0.123).re - 1.246).abs() < 1e-12);
        assert_eq!(phi.interpolate(5.0), Complex64::new(0.0, 0.0));
        let grad = phi.gradient_values();
        assert!((grad[200].re - 2.0).abs() < 1e-12);
    }
}
