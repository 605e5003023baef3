//! Coupled walker / guide-wave propagation in imaginary time.
//!
//! Every electron i carries M walkers r_i^k, each attached to its own guide
//! wave φ_i^k. A step relaxes every guide under the external potential, the
//! kernel-windowed potential of the partner walkers and the same-spin
//! exchange action, and moves every walker by drift and diffusion. Both
//! halves read the previous step's state, so the sweep is independent of
//! scheduling.

mod energy;
mod potential;
mod walkers;

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

pub use energy::{tdqmc_energy, EnergyEstimate, ENERGY_BLOCKS};
pub use potential::{effective_potential, ensemble_spreads, kernel, kernel_widths, weight_z};
pub use walkers::{bohmian_velocity, capped_drift, drift_velocity, DriftPolicy, WalkerMove, NODAL_FLOOR};

use crate::hartree_fock::{hf_solve, ExchangeWorkspace};
use crate::interaction::Interaction;
use crate::model::{KernelWidth, NonlocalityParams, Spin, SystemConfig};
use crate::numerics::orthonormal::orthonormalize_in_place;
use crate::numerics::rng::{substream, Stream};
use crate::numerics::orbital::dot_weighted;
use crate::numerics::{shifted_crank_nicolson_step, CrankNicolsonScratch, DensitySampler, Orbital};
use crate::{math, par, Error, Result};
use potential::EffectiveField;

/// Walker positions of N electrons × M walkers with one random stream per
/// walker index.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerEnsemble {
    n: usize,
    m: usize,
    /// Electron-major: positions[i * m + k] = r_i^k.
    positions: Vec<f64>,
    spins: Vec<Spin>,
    step_index: usize,
    streams: Vec<Stream>,
}

impl WalkerEnsemble {
    /// Explicit positions, one row per electron, with streams derived from
    /// `seed`.
    pub fn from_positions(rows: Vec<Vec<f64>>, spins: Vec<Spin>, seed: u64) -> Result<Self> {
        let m = rows.first().map_or(0, |r| r.len());
        if rows.len() != spins.len() || m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidConfig {
                field: "positions",
                reason: "need one equally long, non-empty row per electron".into(),
            });
        }
        let streams = (0..m as u64).map(|k| substream(seed, k)).collect();
        Ok(Self { n: rows.len(), m, positions: rows.concat(), spins, step_index: 0, streams })
    }

    /// Walker k draws electron 0..N from |φ_i|² in order using stream k.
    pub fn sample(orbitals: &[Orbital], spins: Vec<Spin>, m: usize, seed: u64) -> Result<Self> {
        let n = orbitals.len();
        let samplers = orbitals
            .iter()
            .map(|o| DensitySampler::new(*o.grid(), &o.density()))
            .collect::<Result<Vec<_>>>()?;
        let mut positions = alloc::vec![0.0; n * m];
        let mut streams = Vec::with_capacity(m);
        for k in 0..m {
            let mut rng = substream(seed, k as u64);
            for (i, s) in samplers.iter().enumerate() {
                positions[i * m + k] = s.sample(&mut rng);
            }
            streams.push(rng);
        }
        Ok(Self { n, m, positions, spins, step_index: 0, streams })
    }

    /// Reassembles an ensemble from raw parts (checkpoint restore).
    pub fn from_parts(
        positions: Vec<f64>,
        spins: Vec<Spin>,
        m: usize,
        step_index: usize,
        streams: Vec<Stream>,
    ) -> Result<Self> {
        let n = spins.len();
        if positions.len() != n * m || streams.len() != m {
            return Err(Error::InvalidConfig { field: "checkpoint", reason: "inconsistent walker arrays".into() });
        }
        Ok(Self { n, m, positions, spins, step_index, streams })
    }

    pub fn n_electrons(&self) -> usize {
        self.n
    }

    pub fn n_walkers(&self) -> usize {
        self.m
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn streams(&self) -> &[Stream] {
        &self.streams
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// All walkers of electron i.
    pub fn electron(&self, i: usize) -> &[f64] {
        &self.positions[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub fn position(&self, i: usize, k: usize) -> f64 {
        self.positions[i * self.m + k]
    }
}

/// The M×N family of guide waves φ_i^k.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideWaveSet {
    n: usize,
    m: usize,
    /// Electron-major: waves[i * m + k] = φ_i^k.
    waves: Vec<Orbital>,
}

impl GuideWaveSet {
    /// Every replica of electron i starts as `orbitals[i]`.
    pub fn uniform(orbitals: &[Orbital], m: usize) -> Self {
        let waves = orbitals.iter().flat_map(|o| core::iter::repeat_n(o.clone(), m)).collect();
        Self { n: orbitals.len(), m, waves }
    }

    pub fn from_parts(n: usize, m: usize, waves: Vec<Orbital>) -> Result<Self> {
        if waves.len() != n * m {
            return Err(Error::InvalidConfig { field: "checkpoint", reason: "inconsistent guide arrays".into() });
        }
        Ok(Self { n, m, waves })
    }

    pub fn n_electrons(&self) -> usize {
        self.n
    }

    pub fn n_walkers(&self) -> usize {
        self.m
    }

    pub fn waves(&self) -> &[Orbital] {
        &self.waves
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> &Orbital {
        &self.waves[i * self.m + k]
    }

    /// φ_i^k for k = 0..M.
    pub fn electron(&self, i: usize) -> &[Orbital] {
        &self.waves[i * self.m..(i + 1) * self.m]
    }

    /// φ_0^k … φ_{N−1}^k.
    pub fn replica(&self, k: usize) -> Vec<&Orbital> {
        (0..self.n).map(|i| self.get(i, k)).collect()
    }

    /// Largest |⟨φ_i^k, φ_j^k⟩ − δ_ij| over equal-spin pairs and replicas.
    pub fn orthonormality_error(&self, spins: &[Spin]) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.m {
            for i in 0..self.n {
                for j in i..self.n {
                    if spins[i] != spins[j] {
                        continue;
                    }
                    let (a, b) = (self.get(i, k), self.get(j, k));
                    let s = dot_weighted(a.grid(), a.values(), b.values());
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((s - target).norm());
                }
            }
        }
        worst
    }

    /// max_k ‖φ_i^k − ⟨φ_i⟩‖ (L² norm).
    pub fn spread(&self, i: usize) -> f64 {
        let reps = self.electron(i);
        let g = *reps[0].grid();
        let mut mean = alloc::vec![Complex64::new(0.0, 0.0); g.len()];
        for r in reps {
            mean.iter_mut().zip(r.values()).for_each(|(m, v)| *m += v);
        }
        let inv = 1.0 / reps.len() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        reps.iter()
            .map(|r| {
                let d: Vec<f64> = r.values().iter().zip(&mean).map(|(v, m)| (v - m).norm_sqr()).collect();
                math::sqrt(g.trapezoid(&d))
            })
            .fold(0.0, f64::max)
    }

    /// Largest imaginary part over all guides; imaginary-time guides started
    /// from real orbitals stay real.
    pub fn max_imaginary(&self) -> f64 {
        self.waves.iter().flat_map(|w| w.values()).map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}

/// Whether kernel widths follow the live walker spread or stay at their
/// initial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaUpdate {
    #[default]
    PerStep,
    Frozen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub seed: u64,
    pub sigma_update: SigmaUpdate,
    /// Electrons whose guides stay at their starting orbitals (their walkers
    /// still move).
    pub frozen: Vec<usize>,
    /// Trailing steps averaged into the final energy.
    pub average_steps: usize,
    /// Trace interval in steps (0 disables the trace).
    pub trace_every: usize,
    /// Walkers used for the exchange term of trace entries.
    pub trace_exchange_walkers: usize,
    pub drift: DriftPolicy,
    pub energy_blocks: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            sigma_update: SigmaUpdate::PerStep,
            frozen: Vec::new(),
            average_steps: 50,
            trace_every: 10,
            trace_exchange_walkers: 64,
            drift: DriftPolicy::Capped,
            energy_blocks: ENERGY_BLOCKS,
        }
    }
}

/// Running per-walker sums of local energies over the averaging window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyWindow {
    pub sums: Vec<f64>,
    pub counts: Vec<usize>,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct TdqmcState {
    pub ensemble: WalkerEnsemble,
    pub guides: GuideWaveSet,
    pub params: NonlocalityParams,
    pub options: EngineOptions,
    /// (step, energy) pairs; the exchange term of each entry is estimated on
    /// a subset of replicas.
    pub energy_trace: Vec<(usize, f64)>,
    /// Spreads s_j used when widths are frozen.
    pub reference_spreads: Option<Vec<f64>>,
    pub window: EnergyWindow,
    /// Final estimate, set once the run reaches `n_steps`.
    pub energy: Option<EnergyEstimate>,
    /// Walker moves that ended in a re-sample.
    pub resampled: usize,
}

/// Collaborators shared by every step of a run.
struct Context {
    inter: Interaction,
    frozen: Vec<bool>,
}

impl Context {
    fn new(config: &SystemConfig, options: &EngineOptions) -> Self {
        let mut frozen = alloc::vec![false; config.n_electrons()];
        for &i in &options.frozen {
            if i < frozen.len() {
                frozen[i] = true;
            }
        }
        Self { inter: Interaction::new(config), frozen }
    }
}

impl TdqmcState {
    /// Guides set to `orbitals`, walkers drawn from |φ_i|².
    pub fn new(
        config: &SystemConfig,
        params: NonlocalityParams,
        options: EngineOptions,
        orbitals: &[Orbital],
    ) -> Result<Self> {
        config.validate()?;
        let n = config.n_electrons();
        if orbitals.len() != n || params.len() != n {
            return Err(Error::InvalidConfig {
                field: "alpha",
                reason: format!("expected {n} electrons in orbitals and nonlocality table"),
            });
        }
        if options.frozen.iter().any(|&i| i >= n) {
            return Err(Error::InvalidConfig { field: "frozen", reason: "electron index out of range".into() });
        }
        let m = config.n_walkers;
        let ensemble = WalkerEnsemble::sample(orbitals, config.spins.clone(), m, options.seed)?;
        let reference_spreads = match options.sigma_update {
            SigmaUpdate::Frozen => Some(ensemble_spreads(&ensemble)?),
            SigmaUpdate::PerStep => None,
        };
        Ok(Self {
            ensemble,
            guides: GuideWaveSet::uniform(orbitals, m),
            params,
            options,
            energy_trace: Vec::new(),
            reference_spreads,
            window: EnergyWindow { sums: alloc::vec![0.0; m], counts: alloc::vec![0; m], evaluations: 0 },
            energy: None,
            resampled: 0,
        })
    }

    pub fn step_index(&self) -> usize {
        self.ensemble.step_index
    }

    /// Kernel width of every ordered pair (j, i) at the current step.
    pub fn kernel_widths(&self) -> Result<Vec<KernelWidth>> {
        let spreads = match &self.reference_spreads {
            Some(s) => s.clone(),
            None => ensemble_spreads(&self.ensemble)?,
        };
        Ok(kernel_widths(&self.params, &spreads))
    }

    /// Advances until `config.n_steps`, then finalizes the energy.
    pub fn run(&mut self, config: &SystemConfig) -> Result<()> {
        self.run_until(config, config.n_steps)
    }

    /// Advances up to step `stop` (bounded by `config.n_steps`); finalizes
    /// the energy when the last step is reached. Lets callers checkpoint in
    /// between.
    pub fn run_until(&mut self, config: &SystemConfig, stop: usize) -> Result<()> {
        let ctx = Context::new(config, &self.options);
        let stop = stop.min(config.n_steps);
        while self.step_index() < stop {
            self.step(config, &ctx)?;
        }
        if self.step_index() >= config.n_steps && self.energy.is_none() {
            self.finalize(config, &ctx);
        }
        Ok(())
    }

    fn step(&mut self, config: &SystemConfig, ctx: &Context) -> Result<()> {
        let widths = self.kernel_widths()?;
        let guides = guide_step(self, config, ctx, &widths)?;
        let mv = WalkerMove { dtau: config.dtau, drift: self.options.drift, noise: 1.0 };
        let (positions, streams, resampled) = walkers::move_walkers(&self.ensemble, &self.guides, &mv);
        self.guides = guides;
        self.ensemble.positions = positions;
        self.ensemble.streams = streams;
        self.ensemble.step_index += 1;
        self.resampled += resampled;

        let step = self.step_index();
        let in_window = step + self.options.average_steps > config.n_steps;
        let trace_due = self.options.trace_every > 0 && (step % self.options.trace_every == 0 || step == config.n_steps);
        if in_window || trace_due {
            let local = energy::local_energies(&self.ensemble, &self.guides, config);
            if in_window {
                self.window.evaluations += local.len();
                for (k, e) in local.iter().enumerate() {
                    if let Some(e) = e {
                        self.window.sums[k] += e;
                        self.window.counts[k] += 1;
                    }
                }
            }
            if trace_due {
                let m = self.ensemble.m;
                let stride = (m / self.options.trace_exchange_walkers.max(1)).max(1);
                let subset: Vec<usize> = (0..m).step_by(stride).collect();
                let x = energy::exchange_corrections(&self.guides, &config.spins, &ctx.inter, &subset);
                let x_mean = x.iter().sum::<f64>() / x.len().max(1) as f64;
                let kept: Vec<f64> = local.iter().flatten().copied().collect();
                let e = kept.iter().sum::<f64>() / kept.len().max(1) as f64 - x_mean;
                self.energy_trace.push((step, e));
            }
        }
        Ok(())
    }

    fn finalize(&mut self, config: &SystemConfig, ctx: &Context) {
        let all: Vec<usize> = (0..self.ensemble.m).collect();
        let x = energy::exchange_corrections(&self.guides, &config.spins, &ctx.inter, &all);
        self.energy = Some(energy::estimate_from_window(
            &self.window.sums,
            &self.window.counts,
            &x,
            self.window.evaluations,
            self.options.energy_blocks,
        ));
    }
}

/// New guides for every replica from the current walkers and guides.
fn guide_step(state: &TdqmcState, config: &SystemConfig, ctx: &Context, widths: &[KernelWidth]) -> Result<GuideWaveSet> {
    let ens = &state.ensemble;
    let old = &state.guides;
    let (n, m) = (ens.n, ens.m);
    let grid = config.grid;
    let g = grid.len();
    let active: Vec<bool> = ctx.frozen.iter().map(|f| !f).collect();
    let field = EffectiveField::build(ens, widths, config, &ctx.inter, &active);
    let step = ens.step_index;
    let has_partner: Vec<bool> =
        (0..n).map(|i| (0..n).any(|j| j != i && config.spins[j] == config.spins[i])).collect();
    let init = || {
        (
            alloc::vec![0.0; g],
            alloc::vec![Complex64::new(0.0, 0.0); g],
            ExchangeWorkspace::new(g),
            CrankNicolsonScratch::default(),
        )
    };
    let replicas = par::map_range_with(m, init, |scratch, k| -> Result<Vec<Orbital>> {
        let (pot, x, ws, scratch) = scratch;
        let views: Vec<&[Complex64]> = (0..n).map(|i| old.get(i, k).values()).collect();
        let mut out: Vec<Orbital> = (0..n).map(|i| old.get(i, k).clone()).collect();
        for i in (0..n).filter(|&i| active[i]) {
            field.potential(i, k, ens, config, pot);
            let src = if has_partner[i] {
                crate::hartree_fock::exchange_action(i, &views, &config.spins, &ctx.inter, ws, x);
                Some(x.as_slice())
            } else {
                None
            };
            let values = out[i].values_mut();
            shifted_crank_nicolson_step(values, pot, src, &grid, config.dtau, config.stencil, scratch);
            if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::BlowUp { electron: i, walker: k, step });
            }
        }
        for spin in [Spin::Up, Spin::Down] {
            let mut block: Vec<&mut [Complex64]> = out
                .iter_mut()
                .zip(&config.spins)
                .filter(|(_, s)| **s == spin)
                .map(|(o, _)| o.values_mut())
                .collect();
            orthonormalize_in_place(&grid, &mut block).map_err(|_| Error::BlowUp { electron: 0, walker: k, step })?;
        }
        for i in (0..n).filter(|&i| !active[i]) {
            out[i] = old.get(i, k).clone();
        }
        Ok(out)
    });
    let mut waves: Vec<Option<Orbital>> = alloc::vec![None; n * m];
    for (k, rep) in replicas.into_iter().enumerate() {
        for (i, o) in rep?.into_iter().enumerate() {
            waves[i * m + k] = Some(o);
        }
    }
    Ok(GuideWaveSet { n, m, waves: waves.into_iter().map(|w| w.expect("filled")).collect() })
}

/// One guide update of every replica against the current walkers.
pub fn propagate_guides_step(state: &TdqmcState, config: &SystemConfig) -> Result<GuideWaveSet> {
    let ctx = Context::new(config, &state.options);
    guide_step(state, config, &ctx, &state.kernel_widths()?)
}

/// One walker move against the current guides.
pub fn advance_walkers_step(state: &TdqmcState, config: &SystemConfig) -> WalkerEnsemble {
    let mv = WalkerMove { dtau: config.dtau, drift: state.options.drift, noise: 1.0 };
    advance_walkers_with(state, &mv)
}

/// Walker move with explicit tunables (e.g. zero noise).
pub fn advance_walkers_with(state: &TdqmcState, mv: &WalkerMove) -> WalkerEnsemble {
    let (positions, streams, _) = walkers::move_walkers(&state.ensemble, &state.guides, mv);
    WalkerEnsemble { positions, streams, step_index: state.ensemble.step_index + 1, ..state.ensemble.clone() }
}

/// Hartree-Fock start followed by `config.n_steps` coupled steps.
pub fn prepare_ground_state(config: &SystemConfig, params: NonlocalityParams, options: EngineOptions) -> Result<TdqmcState> {
    let hf = hf_solve(config)?;
    prepare_from_orbitals(config, params, options, &hf.orbitals)
}

/// As [`prepare_ground_state`] from precomputed starting orbitals.
pub fn prepare_from_orbitals(
    config: &SystemConfig,
    params: NonlocalityParams,
    options: EngineOptions,
    orbitals: &[Orbital],
) -> Result<TdqmcState> {
    let mut state = TdqmcState::new(config, params, options, orbitals)?;
    state.run(config)?;
    Ok(state)
}
