//! Nonlocality scans and the electron-number series built on them.
//!
//! A scan runs the coupled walker / guide-wave relaxation once per value of
//! the nonlocality parameter, always with the same seed, and fits a
//! polynomial through the energies to locate the minimum.

use alloc::vec::Vec;

use crate::engine::{prepare_from_orbitals, EngineOptions, EnergyEstimate, TdqmcState};
use crate::entanglement::{
    guide_rdm_distinguishable, guide_rdm_identical, linear_entropy_distinguishable, linear_entropy_identical,
    DensityMatrix, IdenticalEntropy,
};
use crate::hartree_fock::hf_solve;
use crate::model::{Nonlocality, NonlocalityParams, Spin, SystemConfig};
use crate::numerics::Orbital;
use crate::oracle::{exact_ground_state, exact_one_body_rdm, OracleOptions, Symmetry};
use crate::{par, Error, Result};

pub const DEFAULT_FIT_DEGREE: usize = 4;

/// Smallest number of scan points and smallest max/min ratio accepted.
pub const MIN_SCAN_POINTS: usize = 5;
pub const MIN_SCAN_RATIO: f64 = 4.0;

/// Samples of the fitted polynomial used to locate its minimum.
const FIT_SEARCH_POINTS: usize = 2001;

/// Which parameter the scanned pairs receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanVariable {
    /// σ = α·s_j, with s_j the live spread of the partner ensemble.
    Alpha,
    /// σ given directly.
    Sigma,
}

impl ScanVariable {
    pub fn label(self) -> &'static str {
        match self {
            ScanVariable::Alpha => "alpha",
            ScanVariable::Sigma => "sigma",
        }
    }

    fn nonlocality(self, value: f64) -> Nonlocality {
        match self {
            ScanVariable::Alpha => Nonlocality::from_alpha(value),
            ScanVariable::Sigma => Nonlocality::from_sigma(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub variable: ScanVariable,
    /// Ordered pairs (j, i) that take the scanned value; every other pair
    /// keeps its base setting.
    pub pairs: Vec<(usize, usize)>,
    /// Strictly increasing, finite and positive.
    pub values: Vec<f64>,
    pub fit_degree: usize,
}

impl ScanSpec {
    pub fn new(variable: ScanVariable, pairs: Vec<(usize, usize)>, values: Vec<f64>) -> Self {
        Self { variable, pairs, values, fit_degree: DEFAULT_FIT_DEGREE }
    }

    pub fn validate(&self, n_electrons: usize) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidScan(m));
        if self.values.len() < MIN_SCAN_POINTS {
            return bad(alloc::format!("need at least {MIN_SCAN_POINTS} scan points, got {}", self.values.len()));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("scan values must be finite and positive".into());
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return bad("scan values must be strictly increasing".into());
        }
        let ratio = self.values[self.values.len() - 1] / self.values[0];
        if ratio < MIN_SCAN_RATIO {
            return bad(alloc::format!("scan must span a factor of {MIN_SCAN_RATIO}, spans {ratio:.3}"));
        }
        if self.fit_degree == 0 || self.fit_degree >= self.values.len() {
            return bad(alloc::format!("fit degree {} needs more than that many points", self.fit_degree));
        }
        if self.pairs.is_empty() {
            return bad("no pairs selected".into());
        }
        if let Some(&(j, i)) = self.pairs.iter().find(|&&(j, i)| j >= n_electrons || i >= n_electrons || i == j) {
            return bad(alloc::format!("pair ({j}, {i}) is not an ordered pair of distinct electrons"));
        }
        Ok(())
    }

    /// `base` with the scanned pairs set to `value`.
    pub fn params(&self, base: &NonlocalityParams, value: f64) -> NonlocalityParams {
        let mut p = base.clone();
        for &(j, i) in &self.pairs {
            p.set(j, i, self.variable.nonlocality(value));
        }
        p
    }
}

/// `count` evenly spaced values from `lo` to `hi`.
pub fn linear_values(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..count).map(|q| lo + (hi - lo) * q as f64 / (count - 1) as f64).collect(),
    }
}

/// Polynomial in t = (v − center)/half_width, ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub center: f64,
    pub half_width: f64,
    pub coefficients: Vec<f64>,
}

impl Polynomial {
    /// Least-squares fit of the given degree. The abscissa is mapped onto
    /// [−1, 1] before the normal equations are formed.
    pub fn fit(x: &[f64], y: &[f64], degree: usize) -> Result<Self> {
        if x.len() != y.len() || x.len() <= degree {
            return Err(Error::TooFewSamples { needed: degree + 1, got: x.len().min(y.len()) });
        }
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let center = 0.5 * (lo + hi);
        let half_width = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
        let m = degree + 1;
        let mut a = alloc::vec![0.0; m * m];
        let mut b = alloc::vec![0.0; m];
        for (&xv, &yv) in x.iter().zip(y) {
            let t = (xv - center) / half_width;
            let powers: Vec<f64> = (0..m).scan(1.0, |p, _| {
                let cur = *p;
                *p *= t;
                Some(cur)
            })
            .collect();
            for r in 0..m {
                b[r] += powers[r] * yv;
                for c in 0..m {
                    a[r * m + c] += powers[r] * powers[c];
                }
            }
        }
        let coefficients = solve_dense(&mut a, &mut b, m).ok_or(Error::Degenerate { index: 0, residual: 0.0 })?;
        Ok(Self { center, half_width, coefficients })
    }

    pub fn eval(&self, v: f64) -> f64 {
        let t = (v - self.center) / self.half_width;
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// Argmin over `FIT_SEARCH_POINTS` samples of [lo, hi], with the index
    /// of the sample.
    fn minimum_on(&self, lo: f64, hi: f64) -> (usize, f64, f64) {
        let mut best = (0, lo, self.eval(lo));
        for q in 1..FIT_SEARCH_POINTS {
            let v = lo + (hi - lo) * q as f64 / (FIT_SEARCH_POINTS - 1) as f64;
            let e = self.eval(v);
            if e < best.2 {
                best = (q, v, e);
            }
        }
        best
    }
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for col in 0..m {
        let piv = (col..m).max_by(|&p, &q| a[p * m + col].abs().total_cmp(&a[q * m + col].abs()))?;
        if a[piv * m + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for c in 0..m {
                a.swap(piv * m + c, col * m + c);
            }
            b.swap(piv, col);
        }
        for r in col + 1..m {
            let f = a[r * m + col] / a[col * m + col];
            for c in col..m {
                a[r * m + c] -= f * a[col * m + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = alloc::vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r * m + c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r * m + r];
    }
    Some(x)
}

/// Identical-particle entropy of one spin block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEntropy {
    pub spin: Spin,
    pub n_same_spin: usize,
    pub entropy: IdenticalEntropy,
    pub rdm: DensityMatrix,
}

/// Entanglement and ensemble diagnostics of a relaxed state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    /// 1 − Tr ρ_i² per electron.
    pub distinguishable: Vec<f64>,
    /// One entry per spin present, up first.
    pub identical: Vec<BlockEntropy>,
    /// Walker spread s_j per electron at the end of the run.
    pub spreads: Vec<f64>,
    pub orthonormality_error: f64,
    /// Replica sets that needed the overlap-matrix RDM formula.
    pub slater_fallbacks: usize,
}

impl Observables {
    pub fn block(&self, spin: Spin) -> Option<&BlockEntropy> {
        self.identical.iter().find(|b| b.spin == spin)
    }
}

pub fn observe(state: &TdqmcState, config: &SystemConfig) -> Result<Observables> {
    let n = config.n_electrons();
    let distinguishable = par::map_range(n, |i| {
        guide_rdm_distinguishable(i, &state.guides).map(|rho| linear_entropy_distinguishable(&rho))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let mut identical = Vec::new();
    let mut slater_fallbacks = 0;
    for spin in [Spin::Up, Spin::Down] {
        let n_same_spin = config.spins.iter().filter(|s| **s == spin).count();
        if n_same_spin == 0 {
            continue;
        }
        let (rdm, diag) = guide_rdm_identical(spin, &state.guides, &config.spins)?;
        slater_fallbacks += diag.fallbacks;
        let entropy = linear_entropy_identical(&rdm, n_same_spin);
        identical.push(BlockEntropy { spin, n_same_spin, entropy, rdm });
    }
    Ok(Observables {
        distinguishable,
        identical,
        spreads: crate::engine::ensemble_spreads(&state.ensemble)?,
        orthonormality_error: state.guides.orthonormality_error(&config.spins),
        slater_fallbacks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub value: f64,
    pub energy: EnergyEstimate,
    pub observables: Observables,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub spec: ScanSpec,
    pub seed: u64,
    pub points: Vec<ScanPoint>,
    pub fit: Polynomial,
    /// (value, energy) at the minimum of the fit.
    pub minimum: (f64, f64),
    /// (value, energy) of the lowest sample.
    pub raw_minimum: (f64, f64),
    /// Sample closest to the fitted minimum.
    pub nearest: usize,
    /// The fitted minimum sits on an end of the scanned interval.
    pub boundary_minimum: bool,
    pub residual_rms: f64,
    pub median_std_error: f64,
}

impl ScanResult {
    /// Standard error attached to the fitted minimum (that of the nearest
    /// sample).
    pub fn minimum_std_error(&self) -> f64 {
        self.points[self.nearest].energy.std_error
    }

    /// Residual RMS within three median standard errors.
    pub fn fit_within_noise(&self) -> bool {
        self.residual_rms <= 3.0 * self.median_std_error
    }

    pub fn energies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.energy.mean).collect()
    }
}

/// Relaxes one state per scan value from the given starting orbitals, all
/// with `options.seed`, and fits the energies.
pub fn alpha_scan_from(
    config: &SystemConfig,
    spec: &ScanSpec,
    base: &NonlocalityParams,
    options: &EngineOptions,
    orbitals: &[Orbital],
) -> Result<ScanResult> {
    spec.validate(config.n_electrons())?;
    let mut points = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let state = prepare_from_orbitals(config, spec.params(base, value), options.clone(), orbitals)?;
        let energy = state.energy.ok_or(Error::NonFinite("energy window"))?;
        if !energy.mean.is_finite() {
            return Err(Error::NonFinite("scan energy"));
        }
        let observables = observe(&state, config)?;
        points.push(ScanPoint { value, energy, observables });
    }
    summarize(spec.clone(), options.seed, points)
}

/// [`alpha_scan_from`] starting at Hartree-Fock with every other pair at the
/// mean-field limit.
pub fn alpha_scan(config: &SystemConfig, spec: &ScanSpec, options: &EngineOptions) -> Result<ScanResult> {
    spec.validate(config.n_electrons())?;
    let hf = hf_solve(config)?;
    alpha_scan_from(config, spec, &NonlocalityParams::mean_field(config.n_electrons()), options, &hf.orbitals)
}

fn summarize(spec: ScanSpec, seed: u64, points: Vec<ScanPoint>) -> Result<ScanResult> {
    let x: Vec<f64> = points.iter().map(|p| p.value).collect();
    let y: Vec<f64> = points.iter().map(|p| p.energy.mean).collect();
    let fit = Polynomial::fit(&x, &y, spec.fit_degree)?;
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let (q, v, e) = fit.minimum_on(lo, hi);
    let boundary_minimum = q == 0 || q == FIT_SEARCH_POINTS - 1;
    let nearest = (0..x.len()).min_by(|&a, &b| (x[a] - v).abs().total_cmp(&(x[b] - v).abs())).unwrap_or(0);
    let raw = (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
    let residual_rms = crate::math::sqrt(
        x.iter().zip(&y).map(|(xv, yv)| (fit.eval(*xv) - yv) * (fit.eval(*xv) - yv)).sum::<f64>() / x.len() as f64,
    );
    let mut se: Vec<f64> = points.iter().map(|p| p.energy.std_error).collect();
    se.sort_by(f64::total_cmp);
    let median_std_error = if se.len() % 2 == 1 {
        se[se.len() / 2]
    } else {
        0.5 * (se[se.len() / 2 - 1] + se[se.len() / 2])
    };
    Ok(ScanResult {
        spec,
        seed,
        minimum: (v, e),
        raw_minimum: (x[raw], y[raw]),
        nearest,
        boundary_minimum,
        residual_rms,
        median_std_error,
        fit,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// One up-spin electron per harmonic level.
    Polarized,
    /// Two opposite-spin electrons per level, filled shell by shell.
    Compensated,
}

impl SeriesKind {
    pub fn label(self) -> &'static str {
        match self {
            SeriesKind::Polarized => "polarized",
            SeriesKind::Compensated => "compensated",
        }
    }
}

/// Settings shared by every row of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPlan {
    /// α values for the polarized series, σ values for the compensated one.
    pub scan_values: Vec<f64>,
    pub fit_degree: usize,
    pub options: EngineOptions,
    /// Rows up to this many electrons also get the tensor-grid reference.
    pub oracle_max_electrons: usize,
    /// Re-run the two-shell row at its optimum with the inner shell free.
    pub check_frozen_shells: bool,
}

impl SeriesPlan {
    pub fn new(kind: SeriesKind) -> Self {
        let (scan_values, oracle_max_electrons) = match kind {
            SeriesKind::Polarized => (linear_values(0.25, 2.0, 8), 3),
            SeriesKind::Compensated => (linear_values(0.3, 1.5, 7), 4),
        };
        Self {
            scan_values,
            fit_degree: DEFAULT_FIT_DEGREE,
            options: EngineOptions::default(),
            oracle_max_electrons,
            check_frozen_shells: true,
        }
    }
}

/// Tensor-grid reference values for one row.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleColumns {
    pub energy: f64,
    /// 1 − N_σ Tr ρ² for the spin-up block.
    pub entropy_identical: f64,
    pub entropy_distinguishable: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    /// Occupied levels (polarized) or filled shells (compensated).
    pub size: usize,
    pub n_electrons: usize,
    /// Fitted minimum energy and the standard error of the nearest sample.
    pub energy: f64,
    pub std_error: f64,
    pub hf_energy: f64,
    pub oracle: Option<OracleColumns>,
    /// Spin-up block: 1 − N_σ Tr ρ².
    pub entropy_identical: IdenticalEntropy,
    pub entropy_distinguishable: Vec<f64>,
    pub alpha_star: f64,
    pub sigma_star: f64,
    pub boundary_minimum: bool,
    pub scan: Option<ScanResult>,
    /// Same optimum with every guide free to relax.
    pub unfrozen: Option<EnergyEstimate>,
    /// Identical-particle RDM of the spin-up block at the optimum.
    pub rdm: DensityMatrix,
}

impl SeriesRow {
    pub fn below_hf(&self) -> bool {
        self.energy <= self.hf_energy + 3.0 * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    pub kind: SeriesKind,
    pub rows: Vec<SeriesRow>,
}

impl SeriesReport {
    pub fn all_below_hf(&self) -> bool {
        self.rows.iter().all(SeriesRow::below_hf)
    }

    pub fn energy_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].energy > w[0].energy)
    }

    /// max − min identical-particle entropy over rows with N ≥ 2.
    pub fn entropy_spread(&self) -> f64 {
        let s: Vec<f64> = self.rows.iter().filter(|r| r.n_electrons >= 2).map(|r| r.entropy_identical.value).collect();
        if s.is_empty() {
            return 0.0;
        }
        s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - s.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest relative deviation of α* from its mean over rows with N ≥ 2.
    pub fn alpha_star_deviation(&self) -> f64 {
        let a: Vec<f64> = self.rows.iter().filter(|r| r.n_electrons >= 2).map(|r| r.alpha_star).collect();
        if a.is_empty() {
            return 0.0;
        }
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        a.iter().map(|v| (v - mean).abs() / mean.abs()).fold(0.0, f64::max)
    }
}

/// Reference energy and entropies from the tensor-grid solver.
pub fn oracle_columns(config: &SystemConfig, symmetry: Symmetry) -> Result<OracleColumns> {
    let n = config.n_electrons();
    let res = exact_ground_state(config, symmetry, &OracleOptions::for_electrons(n))?;
    let mut entropy_distinguishable = Vec::with_capacity(n);
    for i in 0..n {
        entropy_distinguishable.push(linear_entropy_distinguishable(&exact_one_body_rdm(&res.psi, i)?));
    }
    let n_up = config.spins.iter().filter(|s| **s == Spin::Up).count();
    let first_up = config.spins.iter().position(|s| *s == Spin::Up).unwrap_or(0);
    let rho = exact_one_body_rdm(&res.psi, first_up)?;
    Ok(OracleColumns {
        energy: res.energy,
        entropy_identical: linear_entropy_identical(&rho, n_up).raw,
        entropy_distinguishable,
        steps: res.steps,
    })
}

fn config_for(base: &SystemConfig, spins: Vec<Spin>) -> SystemConfig {
    SystemConfig { spins, ..base.clone() }
}

fn up_block(obs: &Observables) -> Result<(IdenticalEntropy, DensityMatrix)> {
    let b = obs.block(Spin::Up).ok_or(Error::InvalidConfig { field: "spins", reason: "no spin-up electron".into() })?;
    Ok((b.entropy, b.rdm.clone()))
}

/// Rows N = 1..=max_levels of same-spin electrons. Only the ground-level
/// windows α_{1,i} are scanned; all others stay at the mean-field limit.
pub fn spin_polarized_series(base: &SystemConfig, max_levels: usize, plan: &SeriesPlan) -> Result<SeriesReport> {
    let mut rows = Vec::with_capacity(max_levels);
    for n in 1..=max_levels {
        let config = config_for(base, alloc::vec![Spin::Up; n]);
        let hf = hf_solve(&config)?;
        let oracle = (n <= plan.oracle_max_electrons)
            .then(|| oracle_columns(&config, Symmetry::Antisymmetric))
            .transpose()?;
        let row = if n == 1 {
            let params = NonlocalityParams::uniform(1, Nonlocality::Local);
            let state = prepare_from_orbitals(&config, params, plan.options.clone(), &hf.orbitals)?;
            let energy = state.energy.ok_or(Error::NonFinite("energy window"))?;
            let obs = observe(&state, &config)?;
            let (entropy_identical, rdm) = up_block(&obs)?;
            SeriesRow {
                size: 1,
                n_electrons: 1,
                energy: energy.mean,
                std_error: energy.std_error,
                hf_energy: hf.energy.total,
                oracle,
                entropy_identical,
                entropy_distinguishable: obs.distinguishable,
                alpha_star: 0.0,
                sigma_star: 0.0,
                boundary_minimum: false,
                scan: None,
                unfrozen: None,
                rdm,
            }
        } else {
            let pairs = (1..n).map(|i| (0, i)).collect();
            let spec = ScanSpec {
                variable: ScanVariable::Alpha,
                pairs,
                values: plan.scan_values.clone(),
                fit_degree: plan.fit_degree,
            };
            let scan =
                alpha_scan_from(&config, &spec, &NonlocalityParams::mean_field(n), &plan.options, &hf.orbitals)?;
            let best = &scan.points[scan.nearest].observables;
            let (entropy_identical, rdm) = up_block(best)?;
            SeriesRow {
                size: n,
                n_electrons: n,
                energy: scan.minimum.1,
                std_error: scan.minimum_std_error(),
                hf_energy: hf.energy.total,
                oracle,
                entropy_identical,
                entropy_distinguishable: best.distinguishable.clone(),
                alpha_star: scan.minimum.0,
                sigma_star: scan.minimum.0 * best.spreads[0],
                boundary_minimum: scan.boundary_minimum,
                scan: Some(scan),
                unfrozen: None,
                rdm,
            }
        };
        rows.push(row);
    }
    Ok(SeriesReport { kind: SeriesKind::Polarized, rows })
}

/// Rows of 1..=max_shells doubly occupied levels. Inner shells keep their
/// Hartree-Fock orbitals and only the outermost pair's window σ is scanned.
pub fn spin_compensated_series(base: &SystemConfig, max_shells: usize, plan: &SeriesPlan) -> Result<SeriesReport> {
    let mut rows = Vec::with_capacity(max_shells);
    for shells in 1..=max_shells {
        let n = 2 * shells;
        let spins: Vec<Spin> = (0..n).map(|i| if i % 2 == 0 { Spin::Up } else { Spin::Down }).collect();
        let config = config_for(base, spins);
        let hf = hf_solve(&config)?;
        let symmetry = if shells == 1 { Symmetry::Symmetric } else { Symmetry::Antisymmetric };
        let oracle = (n <= plan.oracle_max_electrons).then(|| oracle_columns(&config, symmetry)).transpose()?;
        let (a, b) = (n - 2, n - 1);
        let spec = ScanSpec {
            variable: ScanVariable::Sigma,
            pairs: alloc::vec![(a, b), (b, a)],
            values: plan.scan_values.clone(),
            fit_degree: plan.fit_degree,
        };
        let mut options = plan.options.clone();
        options.frozen = (0..a).collect();
        let base_params = NonlocalityParams::mean_field(n);
        let scan = alpha_scan_from(&config, &spec, &base_params, &options, &hf.orbitals)?;
        let best = &scan.points[scan.nearest].observables;
        let (entropy_identical, rdm) = up_block(best)?;
        let sigma_star = scan.minimum.0;
        let unfrozen = if plan.check_frozen_shells && shells == 2 {
            let state =
                prepare_from_orbitals(&config, spec.params(&base_params, sigma_star), plan.options.clone(), &hf.orbitals)?;
            state.energy
        } else {
            None
        };
        rows.push(SeriesRow {
            size: shells,
            n_electrons: n,
            energy: scan.minimum.1,
            std_error: scan.minimum_std_error(),
            hf_energy: hf.energy.total,
            oracle,
            entropy_identical,
            entropy_distinguishable: best.distinguishable.clone(),
            alpha_star: sigma_star / best.spreads[a],
            sigma_star,
            boundary_minimum: scan.boundary_minimum,
            scan: Some(scan),
            unfrozen,
            rdm,
        });
    }
    Ok(SeriesReport { kind: SeriesKind::Compensated, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_fit_recovers_exact_quartic() {
        let x = linear_values(0.2, 2.0, 9);
        let f = |v: f64| 1.0 - 0.5 * v + 0.3 * v * v - 0.02 * v * v * v * v;
        let y: Vec<f64> = x.iter().map(|v| f(*v)).collect();
        let p = Polynomial::fit(&x, &y, 4).unwrap();
        for v in linear_values(0.2, 2.0, 31) {
            assert!((p.eval(v) - f(v)).abs() < 1e-10);
        }
    }

    #[test]
    fn parabola_minimum_and_boundary_flag() {
        let x = linear_values(0.25, 2.0, 8);
        let y: Vec<f64> = x.iter().map(|v| (v - 0.8) * (v - 0.8)).collect();
        let pts = |y: &[f64]| -> Vec<ScanPoint> {
            x.iter()
                .zip(y)
                .map(|(&value, &mean)| ScanPoint {
                    value,
                    energy: EnergyEstimate {
                        mean,
                        std_error: 1e-3,
                        excluded_fraction: 0.0,
                        exchange_correction: 0.0,
                        samples: 1,
                    },
                    observables: Observables {
                        distinguishable: Vec::new(),
                        identical: Vec::new(),
                        spreads: Vec::new(),
                        orthonormality_error: 0.0,
                        slater_fallbacks: 0,
                    },
                })
                .collect()
        };
        let spec = ScanSpec::new(ScanVariable::Sigma, alloc::vec![(0, 1)], x.clone());
        let r = summarize(spec.clone(), 1, pts(&y)).unwrap();
        assert!((r.minimum.0 - 0.8).abs() < 2e-3);
        assert!(r.minimum.1.abs() < 1e-6);
        assert!(!r.boundary_minimum);
        assert!(r.fit_within_noise());
        let slope: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = summarize(spec, 1, pts(&slope)).unwrap();
        assert!(r.boundary_minimum);
        assert_eq!(r.nearest, x.len() - 1);
    }

    #[test]
    fn scan_spec_preconditions() {
        let ok = ScanSpec::new(ScanVariable::Alpha, alloc::vec![(0, 1)], linear_values(0.5, 2.0, 5));
        assert!(ok.validate(2).is_ok());
        let few = ScanSpec { values: linear_values(0.5, 2.0, 4), ..ok.clone() };
        assert!(matches!(few.validate(2), Err(Error::InvalidScan(_))));
        let narrow = ScanSpec { values: linear_values(0.5, 1.9, 6), ..ok.clone() };
        assert!(narrow.validate(2).is_err());
        let diag = ScanSpec { pairs: alloc::vec![(1, 1)], ..ok.clone() };
        assert!(diag.validate(2).is_err());
        let unsorted = ScanSpec { values: alloc::vec![2.0, 0.5, 1.0, 1.5, 1.8], ..ok };
        assert!(unsorted.validate(2).is_err());
    }

    #[test]
    fn scanned_pairs_only_change() {
        let spec = ScanSpec::new(ScanVariable::Alpha, alloc::vec![(0, 1), (0, 2)], linear_values(0.5, 2.0, 5));
        let p = spec.params(&NonlocalityParams::mean_field(3), 0.7);
        assert_eq!(p.get(0, 1), Nonlocality::Alpha(0.7));
        assert_eq!(p.get(0, 2), Nonlocality::Alpha(0.7));
        assert_eq!(p.get(1, 0), Nonlocality::MeanField);
        assert_eq!(p.get(2, 1), Nonlocality::MeanField);
    }
}
