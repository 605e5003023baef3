use alloc::vec::Vec;

use rand::Rng;

use super::{rng, Grid1D};
use crate::{math, Error, Result};

/// Inverse-CDF sampler for a density given at grid nodes and linearly
/// interpolated in between.
#[derive(Debug, Clone)]
pub struct DensitySampler {
    grid: Grid1D,
    density: Vec<f64>,
    // cdf[i] = mass in cells 0..i
    cdf: Vec<f64>,
}

impl DensitySampler {
    pub fn new(grid: Grid1D, density: &[f64]) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if density.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("density"));
        }
        let density: Vec<f64> = density.iter().map(|d| d.max(0.0)).collect();
        let half_dx = 0.5 * grid.dx();
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in density.windows(2) {
            acc += half_dx * (w[0] + w[1]);
            cdf.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::ZeroDensity);
        }
        Ok(Self { grid, density, cdf })
    }

    pub fn total_mass(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = rng::uniform(rng) * self.total_mass();
        // First cell whose upper cumulative mass exceeds the target.
        let cell = self.cdf[1..].partition_point(|&c| c <= target).min(self.cdf.len() - 2);
        let (a, b) = (self.density[cell], self.density[cell + 1]);
        let dx = self.grid.dx();
        let m = (target - self.cdf[cell]) / dx;
        // Solve a·t + (b − a)·t²/2 = m for t in [0, 1].
        let slope = b - a;
        let t = if slope.abs() < 1e-14 * (a + b).max(f64::MIN_POSITIVE) {
            if a > 0.0 {
                m / a
            } else {
                0.5
            }
        } else {
            let disc = (a * a + 2.0 * slope * m).max(0.0);
            // Stable root of the quadratic.
            2.0 * m / (a + math::sqrt(disc))
        };
        self.grid.x(cell) + t.clamp(0.0, 1.0) * dx
    }
}

/// `count` independent draws from the (unnormalized) `density`.
pub fn sample_positions<R: Rng + ?Sized>(
    grid: &Grid1D,
    density: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let sampler = DensitySampler::new(*grid, density)?;
    Ok((0..count).map(|_| sampler.sample(rng)).collect())
}

/// Population standard deviation.
pub fn ensemble_std(positions: &[f64]) -> Result<f64> {
    if positions.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: positions.len() });
    }
    let n = positions.len() as f64;
    let mean = positions.iter().sum::<f64>() / n;
    let var = positions.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(math::sqrt(var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::substream;

    #[test]
    fn std_examples() {
        assert_eq!(ensemble_std(&[-1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(ensemble_std(&[2.5; 10]).unwrap(), 0.0);
        assert!(ensemble_std(&[1.0]).is_err());
    }

    #[test]
    fn zero_density_is_an_error() {
        let g = Grid1D::symmetric(1.0, 16).unwrap();
        assert_eq!(DensitySampler::new(g, &[0.0; 16]).unwrap_err(), Error::ZeroDensity);
    }

    #[test]
    fn delta_density_stays_in_support() {
        let g = Grid1D::symmetric(2.0, 41).unwrap();
        let mut d = alloc::vec![0.0; 41];
        d[12] = 1.0;
        let mut rng = substream(3, 0);
        for x in sample_positions(&g, &d, 2000, &mut rng).unwrap() {
            assert!(x >= g.x(11) && x <= g.x(13), "{x}");
        }
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let g = Grid1D::default();
        let d: Vec<f64> = g.points().map(|x| math::exp(-x * x)).collect();
        let a = sample_positions(&g, &d, 100, &mut substream(9, 2)).unwrap();
        let b = sample_positions(&g, &d, 100, &mut substream(9, 2)).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
