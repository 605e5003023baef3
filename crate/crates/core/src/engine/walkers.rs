//! Drift-diffusion of the walkers under their guide waves.

use alloc::vec::Vec;

use crate::engine::{GuideWaveSet, WalkerEnsemble};
use crate::numerics::rng::{standard_normal, Stream};
use crate::numerics::{DensitySampler, Orbital};
use crate::{math, par, Error, Result};

/// Relative amplitude below which a point counts as a node of the guide.
pub const NODAL_FLOOR: f64 = 1e-6;

fn log_derivative(phi: &Orbital, x: f64, floor: f64) -> Result<num_complex::Complex64> {
    let (value, slope) = phi.sample_with_gradient(x).ok_or(Error::NodalRegion { x })?;
    if value.norm() <= floor {
        return Err(Error::NodalRegion { x });
    }
    Ok(slope / value)
}

/// Re[∇φ/φ] at `x` (ħ = m = 1).
pub fn drift_velocity(phi: &Orbital, x: f64) -> Result<f64> {
    Ok(log_derivative(phi, x, NODAL_FLOOR * phi.max_abs())?.re)
}

/// Im[∇φ/φ] at `x`: the de Broglie-Bohm velocity for real-time guides.
pub fn bohmian_velocity(phi: &Orbital, x: f64) -> Result<f64> {
    Ok(log_derivative(phi, x, NODAL_FLOOR * phi.max_abs())?.im)
}

/// Smoothly limits |v| so that a single step cannot exceed roughly
/// √(2/dτ) near nodes: v·(√(1 + 2v²dτ) − 1)/(v²dτ).
pub fn capped_drift(v: f64, dtau: f64) -> f64 {
    let v2t = v * v * dtau;
    if v2t < 1e-12 {
        return v;
    }
    v * (math::sqrt(1.0 + 2.0 * v2t) - 1.0) / v2t
}

/// How a walker step treats the drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftPolicy {
    Raw,
    #[default]
    Capped,
}

/// Tunables of a walker sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkerMove {
    pub dtau: f64,
    pub drift: DriftPolicy,
    /// Scales the Gaussian increment; 1 for the physical process, 0 for pure
    /// drift.
    pub noise: f64,
}

/// Moves walker k of every unfrozen electron one step, using stream k in
/// electron order. Returns the new positions (electron-major) and the
/// number of re-sampled walkers.
pub(crate) fn move_walkers(
    ensemble: &WalkerEnsemble,
    guides: &GuideWaveSet,
    mv: &WalkerMove,
) -> (Vec<f64>, Vec<Stream>, usize) {
    let n = ensemble.n_electrons();
    let m = ensemble.n_walkers();
    let sd = math::sqrt(mv.dtau) * mv.noise;
    let moved = par::map_range(m, |k| {
        let mut rng = ensemble.streams()[k].clone();
        let mut out = Vec::with_capacity(n);
        let mut resampled = 0;
        for i in 0..n {
            let phi = guides.get(i, k);
            let floor = NODAL_FLOOR * phi.max_abs();
            let mut x = ensemble.position(i, k);
            let v = match log_derivative(phi, x, floor) {
                Ok(r) => r.re,
                Err(_) => {
                    resampled += 1;
                    x = resample(phi, &mut rng);
                    log_derivative(phi, x, floor).map(|r| r.re).unwrap_or(0.0)
                }
            };
            let v = match mv.drift {
                DriftPolicy::Raw => v,
                DriftPolicy::Capped => capped_drift(v, mv.dtau),
            };
            let eta = standard_normal(&mut rng);
            let mut next = x + v * mv.dtau + eta * sd;
            let inside = phi.sample_with_gradient(next).is_some_and(|(p, _)| p.norm() > floor);
            if !inside {
                resampled += 1;
                next = resample(phi, &mut rng);
            }
            out.push(next);
        }
        (out, rng, resampled)
    });
    let mut positions = alloc::vec![0.0; n * m];
    let mut streams = Vec::with_capacity(m);
    let mut total = 0;
    for (k, (pos, rng, r)) in moved.into_iter().enumerate() {
        for (i, x) in pos.into_iter().enumerate() {
            positions[i * m + k] = x;
        }
        streams.push(rng);
        total += r;
    }
    (positions, streams, total)
}

fn resample(phi: &Orbital, rng: &mut Stream) -> f64 {
    match DensitySampler::new(*phi.grid(), &phi.density()) {
        Ok(s) => s.sample(rng),
        Err(_) => 0.0,
    }
}
