use alloc::format;

use crate::{Error, Result};

/// Uniform grid on a box symmetric about the origin, with zero-Dirichlet
/// walls just outside the first and last point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

impl Grid1D {
    pub const MIN_POINTS: usize = 8;

    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite extent [{x_min}, {x_max}]")));
        }
        if n_points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} points, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        if x_max <= x_min {
            return Err(Error::InvalidGrid(format!("empty extent [{x_min}, {x_max}]")));
        }
        if (x_min + x_max).abs() > 1e-12 * x_max.abs() {
            return Err(Error::InvalidGrid(format!(
                "box must be symmetric about 0, got [{x_min}, {x_max}]"
            )));
        }
        let dx = (x_max - x_min) / (n_points - 1) as f64;
        Ok(Self { x_min, x_max, n_points, dx })
    }

    /// Grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Trapezoidal weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        self.dx * (inner + 0.5 * (values[0] + values[n - 1]))
    }

    /// Cell index and fractional offset for linear interpolation, or `None`
    /// outside the box.
    #[inline]
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let s = (x - self.x_min) / self.dx;
        let i = (crate::math::floor(s) as usize).min(self.n_points - 2);
        Some((i, s - i as f64))
    }
}

impl Default for Grid1D {
    /// `[-8, 8]` with 256 points, wide enough for the ω = 1 dots up to ten
    /// electrons.
    fn default() -> Self {
        Self::symmetric(8.0, 256).expect("default grid is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_symmetry() {
        let g = Grid1D::symmetric(4.0, 9).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert_eq!(g.x(0), -4.0);
        assert_eq!(g.x(4), 0.0);
        assert_eq!(g.x(8), 4.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::new(-1.0, 2.0, 16).is_err());
        assert!(Grid1D::symmetric(1.0, 7).is_err());
        assert!(Grid1D::symmetric(-1.0, 16).is_err());
        assert!(Grid1D::symmetric(f64::NAN, 16).is_err());
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let g = Grid1D::symmetric(2.0, 11).unwrap();
        let v: alloc::vec::Vec<f64> = g.points().map(|x| 3.0 * x + 1.0).collect();
        assert!((g.trapezoid(&v) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn locate_clamps_last_cell() {
        let g = Grid1D::symmetric(1.0, 11).unwrap();
        assert_eq!(g.locate(1.0), Some((9, 1.0)));
        let (i, t) = g.locate(0.05).unwrap();
        assert_eq!(i, 5);
        assert!((t - 0.25).abs() < 1e-12);
        assert!(g.locate(1.01).is_none());
    }
}
