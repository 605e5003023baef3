//! Windowed electron-electron potential seen by each guide wave.

use alloc::vec::Vec;

use crate::engine::WalkerEnsemble;
use crate::interaction::Interaction;
use crate::model::{KernelWidth, NonlocalityParams, SystemConfig};
use crate::numerics::orbital::catmull_rom_weights;
use crate::numerics::{ensemble_std, Grid1D};
use crate::{math, Error, Result};

/// Gaussian window exp(−|xj − xjk|²/2σ²); 1 for σ = +∞.
pub fn kernel(xj: f64, xjk: f64, sigma: f64) -> Result<f64> {
    if sigma == f64::INFINITY {
        return Ok(1.0);
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidKernelWidth(sigma));
    }
    let d = xj - xjk;
    Ok(math::exp(-d * d / (2.0 * sigma * sigma)))
}

/// Z = Σ_l K(r_j^l, r_j^k, σ): the normalization of walker k's window over
/// electron j.
pub fn weight_z(j: usize, k: usize, ensemble: &WalkerEnsemble, sigma: f64) -> Result<f64> {
    let walkers = ensemble.electron(j);
    let center = walkers[k];
    walkers.iter().map(|&x| kernel(x, center, sigma)).sum()
}

/// Population spread s_j of every electron's walkers.
pub fn ensemble_spreads(ensemble: &WalkerEnsemble) -> Result<Vec<f64>> {
    (0..ensemble.n_electrons()).map(|j| ensemble_std(ensemble.electron(j))).collect()
}

/// Kernel width per ordered pair, row-major (j, i), from the spreads s_j.
pub fn kernel_widths(params: &NonlocalityParams, spreads: &[f64]) -> Vec<KernelWidth> {
    let n = params.len();
    (0..n * n).map(|ji| params.get(ji / n, ji % n).width(spreads[ji / n])).collect()
}

/// Direct walker sum of the effective potential on electron i's grid for
/// walker k:
/// Σ_{j≠i} (1/Z) Σ_l v_ee(x, r_j^l) K(r_j^l, r_j^k, σ_ji).
///
/// O(N·M·G); the propagator uses a binned table instead.
pub fn effective_potential(
    i: usize,
    k: usize,
    ensemble: &WalkerEnsemble,
    params: &NonlocalityParams,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    let spreads = ensemble_spreads(ensemble)?;
    let widths = kernel_widths(params, &spreads);
    Ok(effective_potential_with(i, k, ensemble, &widths, config))
}

pub(crate) fn effective_potential_with(
    i: usize,
    k: usize,
    ensemble: &WalkerEnsemble,
    widths: &[KernelWidth],
    config: &SystemConfig,
) -> Vec<f64> {
    let g = config.grid;
    let n = ensemble.n_electrons();
    let mut out = alloc::vec![0.0; g.len()];
    for j in (0..n).filter(|&j| j != i) {
        let walkers = ensemble.electron(j);
        let center = walkers[k];
        let weights: Vec<f64> = match widths[j * n + i] {
            KernelWidth::Local => {
                for (a, o) in out.iter_mut().enumerate() {
                    *o += config.v_ee(g.x(a), center);
                }
                continue;
            }
            KernelWidth::MeanField => alloc::vec![1.0; walkers.len()],
            KernelWidth::Finite(s) => walkers
                .iter()
                .map(|&x| kernel(x, center, s).expect("finite width"))
                .collect(),
        };
        let z: f64 = weights.iter().sum();
        for (a, o) in out.iter_mut().enumerate() {
            let x = g.x(a);
            let s: f64 = walkers.iter().zip(&weights).map(|(&y, w)| w * config.v_ee(x, y)).sum();
            *o += s / z;
        }
    }
    out
}

/// Cloud-in-cell histogram of walker positions on the grid nodes (total
/// mass = number of walkers inside the box).
pub(crate) fn histogram(grid: &Grid1D, positions: &[f64]) -> Vec<f64> {
    let mut h = alloc::vec![0.0; grid.len()];
    for &x in positions {
        if let Some((c, t)) = grid.locate(x) {
            h[c] += 1.0 - t;
            h[c + 1] += t;
        }
    }
    h
}

/// Kernel-windowed potential tabulated for window centres on the grid
/// nodes. Only centres near some walker are filled.
#[derive(Debug, Clone)]
pub(crate) struct KernelTable {
    g: usize,
    rows: Vec<f64>,
}

/// Centres beyond this many widths contribute below 1e-17.
const KERNEL_CUTOFF: f64 = 9.0;

impl KernelTable {
    fn build(grid: &Grid1D, inter: &Interaction, walkers: &[f64], sigma: f64) -> Self {
        let g = grid.len();
        let h = histogram(grid, walkers);
        let mut needed = alloc::vec![false; g];
        for &x in walkers {
            if let Some((c, _)) = grid.locate(x) {
                for m in c.saturating_sub(1)..(c + 3).min(g) {
                    needed[m] = true;
                }
            }
        }
        let reach = (KERNEL_CUTOFF * sigma / grid.dx()) as usize + 1;
        let inv2s2 = 1.0 / (2.0 * sigma * sigma);
        let mut rows = alloc::vec![0.0; g * g];
        let mut w = alloc::vec![0.0; g];
        for c in (0..g).filter(|&c| needed[c]) {
            let lo = c.saturating_sub(reach);
            let hi = (c + reach + 1).min(g);
            let xc = grid.x(c);
            let mut z = 0.0;
            for y in lo..hi {
                let d = grid.x(y) - xc;
                w[y] = h[y] * math::exp(-d * d * inv2s2);
                z += w[y];
            }
            let row = &mut rows[c * g..(c + 1) * g];
            if !(z > 1e-300) {
                // Window empty of walkers: collapse to the local limit.
                row.copy_from_slice(column(inter, c, g).as_slice());
                continue;
            }
            let inv_z = 1.0 / z;
            for (a, r) in row.iter_mut().enumerate() {
                let v = &inter.raw_row(a)[lo..hi];
                *r = math::dot(v, &w[lo..hi]) * inv_z;
            }
        }
        Self { g, rows }
    }

    /// Cubic interpolation of the tabulated potential in the window centre.
    fn add_at(&self, grid: &Grid1D, center: f64, out: &mut [f64]) {
        let Some((c, t)) = grid.locate(center) else { return };
        let w = catmull_rom_weights(t);
        for (m, wm) in w.iter().enumerate() {
            let idx = (c as isize - 1 + m as isize).clamp(0, self.g as isize - 1) as usize;
            let row = &self.rows[idx * self.g..(idx + 1) * self.g];
            out.iter_mut().zip(row).for_each(|(o, r)| *o += wm * r);
        }
    }
}

fn column(inter: &Interaction, c: usize, g: usize) -> Vec<f64> {
    (0..g).map(|a| inter.raw_row(a)[c]).collect()
}

#[derive(Debug, Clone)]
enum PairField {
    Skip,
    Local,
    Table(KernelTable),
}

/// Per-step precomputation of every electron's effective potential.
#[derive(Debug, Clone)]
pub(crate) struct EffectiveField {
    n: usize,
    /// v_en plus all mean-field partner potentials, per electron.
    common: Vec<Vec<f64>>,
    pairs: Vec<PairField>,
}

impl EffectiveField {
    pub fn build(
        ensemble: &WalkerEnsemble,
        widths: &[KernelWidth],
        config: &SystemConfig,
        inter: &Interaction,
        active: &[bool],
    ) -> Self {
        let grid = config.grid;
        let g = grid.len();
        let n = ensemble.n_electrons();
        let v_ext = config.external_potential();
        let mut hartree: Vec<Option<Vec<f64>>> = alloc::vec![None; n];
        let mut common = alloc::vec![v_ext; n];
        let mut pairs = alloc::vec![PairField::Skip; n * n];
        for i in (0..n).filter(|&i| active[i]) {
            for j in (0..n).filter(|&j| j != i) {
                let walkers = ensemble.electron(j);
                match widths[j * n + i] {
                    KernelWidth::MeanField => {
                        let h = hartree[j].get_or_insert_with(|| {
                            let hist = histogram(&grid, walkers);
                            let inv_m = 1.0 / walkers.len() as f64;
                            (0..g)
                                .map(|a| math::dot(inter.raw_row(a), &hist) * inv_m)
                                .collect()
                        });
                        common[i].iter_mut().zip(h.iter()).for_each(|(c, h)| *c += h);
                    }
                    KernelWidth::Local => pairs[j * n + i] = PairField::Local,
                    KernelWidth::Finite(s) => {
                        pairs[j * n + i] = PairField::Table(KernelTable::build(&grid, inter, walkers, s))
                    }
                }
            }
        }
        Self { n, common, pairs }
    }

    /// v_en + V_eff for guide (i, k), written into `out`.
    pub fn potential(&self, i: usize, k: usize, ensemble: &WalkerEnsemble, config: &SystemConfig, out: &mut [f64]) {
        let grid = config.grid;
        out.copy_from_slice(&self.common[i]);
        for j in (0..self.n).filter(|&j| j != i) {
            let center = ensemble.position(j, k);
            match &self.pairs[j * self.n + i] {
                PairField::Skip => {}
                PairField::Local => {
                    for (a, o) in out.iter_mut().enumerate() {
                        *o += config.v_ee(grid.x(a), center);
                    }
                }
                PairField::Table(t) => t.add_at(&grid, center, out),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::WalkerEnsemble;
    use crate::model::{Nonlocality, Spin};
    use crate::numerics::rng::substream;
    use crate::numerics::sample_positions;

    #[test]
    fn kernel_values() {
        assert_eq!(kernel(0.3, 0.3, 0.7).unwrap(), 1.0);
        assert_eq!(kernel(-5.0, 9.0, f64::INFINITY).unwrap(), 1.0);
        assert!((kernel(1.5, 1.0, 0.5).unwrap() - math::exp(-0.5)).abs() < 1e-15);
        assert!(matches!(kernel(0.0, 0.0, 0.0), Err(Error::InvalidKernelWidth(_))));
        assert!(kernel(0.0, 0.0, f64::NAN).is_err());
    }

    fn ensemble(positions: Vec<Vec<f64>>) -> WalkerEnsemble {
        let spins = alloc::vec![Spin::Up; positions.len()];
        WalkerEnsemble::from_positions(positions, spins, 1).unwrap()
    }

    #[test]
    fn weight_sums() {
        let single = ensemble(alloc::vec![alloc::vec![0.4]]);
        assert_eq!(weight_z(0, 0, &single, 0.3).unwrap(), 1.0);
        let pair = ensemble(alloc::vec![alloc::vec![0.0, 0.8]]);
        assert!((weight_z(0, 0, &pair, 0.8).unwrap() - (1.0 + math::exp(-0.5))).abs() < 1e-15);
        let many = ensemble(alloc::vec![(0..37).map(|k| k as f64 * 0.1 - 1.0).collect()]);
        assert_eq!(weight_z(0, 5, &many, f64::INFINITY).unwrap(), 37.0);
    }

    #[test]
    fn single_electron_feels_nothing() {
        let cfg = SystemConfig::spin_polarized(1);
        let e = ensemble(alloc::vec![alloc::vec![0.1, -0.2, 0.5]]);
        let p = NonlocalityParams::mean_field(1);
        assert!(effective_potential(0, 1, &e, &p, &cfg).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn local_width_pairs_walkers_by_index() {
        let cfg = SystemConfig::spin_compensated(1);
        let e = ensemble(alloc::vec![alloc::vec![0.1, -0.2, 0.5], alloc::vec![1.0, -1.5, 0.25]]);
        let p = NonlocalityParams::uniform(2, Nonlocality::Local);
        let v = effective_potential(0, 2, &e, &p, &cfg).unwrap();
        for (a, x) in cfg.grid.points().enumerate() {
            assert!((v[a] - cfg.v_ee(x, 0.25)).abs() < 1e-15);
        }
    }

    fn sampled(cfg: &SystemConfig, m: usize, seed: u64) -> WalkerEnsemble {
        let phi = crate::model::harmonic_orbital(cfg.grid, 0, 1.0);
        let mut rng = substream(seed, 0);
        let pos = (0..cfg.n_electrons())
            .map(|_| sample_positions(&cfg.grid, &phi.density(), m, &mut rng).unwrap())
            .collect();
        WalkerEnsemble::from_positions(pos, cfg.spins.clone(), seed).unwrap()
    }

    #[test]
    fn binned_table_tracks_direct_sum() {
        let cfg = SystemConfig::spin_compensated(1);
        let inter = Interaction::new(&cfg);
        let e = sampled(&cfg, 2000, 3);
        for nl in [Nonlocality::Sigma(0.3), Nonlocality::Sigma(1.2), Nonlocality::MeanField, Nonlocality::Local] {
            let p = NonlocalityParams::uniform(2, nl);
            let widths = kernel_widths(&p, &ensemble_spreads(&e).unwrap());
            let field = EffectiveField::build(&e, &widths, &cfg, &inter, &[true, true]);
            let v_ext = cfg.external_potential();
            let mut fast = alloc::vec![0.0; cfg.grid.len()];
            for k in [0, 17, 999] {
                let direct = effective_potential_with(0, k, &e, &widths, &cfg);
                field.potential(0, k, &e, &cfg, &mut fast);
                let worst = fast
                    .iter()
                    .zip(&v_ext)
                    .zip(&direct)
                    .map(|((f, v), d)| (f - v - d).abs())
                    .fold(0.0, f64::max);
                assert!(worst < 2e-3, "{nl:?} walker {k}: {worst}");
            }
        }
    }

    #[test]
    fn mean_field_matches_hartree_within_sampling_error() {
        let cfg = SystemConfig::spin_compensated(1);
        let m = 100_000;
        let e = sampled(&cfg, m, 11);
        let p = NonlocalityParams::mean_field(2);
        let v = effective_potential(0, 0, &e, &p, &cfg).unwrap();
        let phi = crate::model::harmonic_orbital(cfg.grid, 0, 1.0);
        let orbs = [phi.clone(), phi];
        let exact = crate::hartree_fock::hartree_potential(0, &orbs, &cfg);
        for a in (0..cfg.grid.len()).step_by(16) {
            let x = cfg.grid.x(a);
            // Per-sample spread of v_ee(x, r) under |φ0|².
            let samples: Vec<f64> = e.electron(1).iter().map(|&y| cfg.v_ee(x, y)).collect();
            let mean = samples.iter().sum::<f64>() / m as f64;
            let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (m - 1) as f64;
            let se = math::sqrt(var / m as f64);
            assert!((v[a] - exact[a]).abs() <= 3.0 * se + 1e-6, "x={x}: {} vs {}", v[a], exact[a]);
        }
    }
}
