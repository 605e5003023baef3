//! Mixed walker / guide-wave energy estimator.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::engine::walkers::NODAL_FLOOR;
use crate::engine::{GuideWaveSet, TdqmcState, WalkerEnsemble};
use crate::interaction::Interaction;
use crate::model::{Spin, SystemConfig};
use crate::{math, par, Result};

/// Energy with its statistical error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Walkers left out because one of their electrons sat in a nodal region.
    pub excluded_fraction: f64,
    /// Mean same-spin exchange correction already subtracted from `mean`.
    pub exchange_correction: f64,
    /// Walker-steps that entered the average.
    pub samples: usize,
}

/// Default number of walker blocks for the standard error.
pub const ENERGY_BLOCKS: usize = 50;

/// Local energy of every walker,
/// Σ_i [−½ ∇²φ_i^k/φ_i^k + v_en](r_i^k) + Σ_{i>j} v_ee(r_i^k, r_j^k),
/// or `None` when any electron of the walker sits in a nodal region.
pub(crate) fn local_energies(
    ensemble: &WalkerEnsemble,
    guides: &GuideWaveSet,
    config: &SystemConfig,
) -> Vec<Option<f64>> {
    let n = ensemble.n_electrons();
    par::map_range(ensemble.n_walkers(), |k| {
        let mut e = 0.0;
        for i in 0..n {
            let phi = guides.get(i, k);
            let x = ensemble.position(i, k);
            let (value, _) = phi.sample_with_gradient(x)?;
            if value.norm() <= NODAL_FLOOR * phi.max_abs() {
                return None;
            }
            let lap = phi.laplacian_at(x)?;
            e += -0.5 * (lap / value).re + config.v_en(x);
            for j in 0..i {
                e += config.v_ee(x, ensemble.position(j, k));
            }
        }
        Some(e)
    })
}

/// Σ_{i<j, s_i = s_j} Re ∫∫ v_ee(x, x') φ_i(x') φ_j*(x') φ_j(x) φ_i*(x), per
/// replica k: the same-spin correction subtracted from the walker energy.
pub(crate) fn exchange_corrections(
    guides: &GuideWaveSet,
    spins: &[Spin],
    inter: &Interaction,
    walkers: &[usize],
) -> Vec<f64> {
    let n = spins.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| spins[i] == spins[j]).collect();
    if pairs.is_empty() {
        return alloc::vec![0.0; walkers.len()];
    }
    par::map_range(walkers.len(), |w| {
        let k = walkers[w];
        let mut conv = alloc::vec![Complex64::new(0.0, 0.0); inter.len()];
        let mut total = 0.0;
        for &(i, j) in &pairs {
            let (pi, pj) = (guides.get(i, k), guides.get(j, k));
            inter.convolve_product_support(pi.values(), pj.values(), &mut conv);
            let g = pi.grid();
            let integrand: Vec<f64> = (0..conv.len())
                .map(|a| (conv[a] * pj.values()[a] * pi.values()[a].conj()).re)
                .collect();
            total += g.trapezoid(&integrand);
        }
        total
    })
}

/// Mean and blocked standard error of walker-ordered samples.
pub(crate) fn block_estimate(values: &[f64], blocks: usize) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = blocks.min(n).max(1);
    if b < 2 {
        return (mean, f64::NAN);
    }
    let means: Vec<f64> = (0..b)
        .map(|q| {
            let (lo, hi) = (q * n / b, (q + 1) * n / b);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let mm = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - mm) * (x - mm)).sum::<f64>() / (b - 1) as f64;
    (mean, math::sqrt(var / b as f64))
}

/// Combines per-walker sums over the averaging window with the per-walker
/// exchange corrections.
pub(crate) fn estimate_from_window(
    sums: &[f64],
    counts: &[usize],
    exchange: &[f64],
    total_evaluations: usize,
    blocks: usize,
) -> EnergyEstimate {
    let mut values = Vec::with_capacity(sums.len());
    let mut x_total = 0.0;
    let mut samples = 0;
    for k in 0..sums.len() {
        if counts[k] > 0 {
            values.push(sums[k] / counts[k] as f64 - exchange[k]);
            x_total += exchange[k];
            samples += counts[k];
        }
    }
    let (mean, std_error) = block_estimate(&values, blocks);
    EnergyEstimate {
        mean,
        std_error,
        excluded_fraction: 1.0 - samples as f64 / total_evaluations.max(1) as f64,
        exchange_correction: x_total / values.len().max(1) as f64,
        samples,
    }
}

/// Single-snapshot estimate from the current walkers and guides.
pub fn tdqmc_energy(state: &TdqmcState, config: &SystemConfig) -> Result<EnergyEstimate> {
    let inter = Interaction::new(config);
    let m = state.ensemble.n_walkers();
    let local = local_energies(&state.ensemble, &state.guides, config);
    let all: Vec<usize> = (0..m).collect();
    let exchange = exchange_corrections(&state.guides, &config.spins, &inter, &all);
    let sums: Vec<f64> = local.iter().map(|e| e.unwrap_or(0.0)).collect();
    let counts: Vec<usize> = local.iter().map(|e| e.is_some() as usize).collect();
    Ok(estimate_from_window(&sums, &counts, &exchange, m, ENERGY_BLOCKS))
}
