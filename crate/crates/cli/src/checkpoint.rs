//! Binary checkpoints of a running propagation.
//!
//! A checkpoint keeps the configuration text it was started from plus the
//! dynamic state (walkers, random-stream positions, guide waves, energy
//! window). Everything static is rebuilt from the configuration, so a resumed
//! run continues bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tdqmc_core::engine::{EnergyEstimate, EnergyWindow, GuideWaveSet, TdqmcState, WalkerEnsemble};
use tdqmc_core::model::{NonlocalityParams, SystemConfig};
use tdqmc_core::numerics::rng::StreamState;
use tdqmc_core::numerics::{Complex64, Orbital};

use crate::config::{self, Config};
use crate::{CliError, Result};

const FORMAT: u32 = 1;
const MAGIC: [u8; 8] = *b"TDQMCCKP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_text: String,
    /// `--seed` given on the command line, if any.
    pub seed_override: Option<u64>,
    pub manifest_hash: String,
    pub state: StateParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamParts {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateParts {
    pub mean: f64,
    pub std_error: f64,
    pub excluded_fraction: f64,
    pub exchange_correction: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateParts {
    pub n_walkers: usize,
    pub step_index: usize,
    pub positions: Vec<f64>,
    pub streams: Vec<StreamParts>,
    /// One (re, im) interleaved vector per guide wave, electron-major.
    pub guides: Vec<Vec<f64>>,
    pub energy_trace: Vec<(usize, f64)>,
    pub reference_spreads: Option<Vec<f64>>,
    pub window_sums: Vec<f64>,
    pub window_counts: Vec<usize>,
    pub window_evaluations: usize,
    pub energy: Option<EstimateParts>,
    pub resampled: usize,
}

impl StateParts {
    pub fn capture(state: &TdqmcState) -> Self {
        let e = &state.ensemble;
        Self {
            n_walkers: e.n_walkers(),
            step_index: e.step_index(),
            positions: e.positions().to_vec(),
            streams: e
                .streams()
                .iter()
                .map(|s| {
                    let st = StreamState::capture(s);
                    StreamParts { seed: st.seed, stream: st.stream, word_pos: st.word_pos }
                })
                .collect(),
            guides: state
                .guides
                .waves()
                .iter()
                .map(|o| o.values().iter().flat_map(|c| [c.re, c.im]).collect())
                .collect(),
            energy_trace: state.energy_trace.clone(),
            reference_spreads: state.reference_spreads.clone(),
            window_sums: state.window.sums.clone(),
            window_counts: state.window.counts.clone(),
            window_evaluations: state.window.evaluations,
            energy: state.energy.map(|e| EstimateParts {
                mean: e.mean,
                std_error: e.std_error,
                excluded_fraction: e.excluded_fraction,
                exchange_correction: e.exchange_correction,
                samples: e.samples,
            }),
            resampled: state.resampled,
        }
    }

    /// Rebuilds the state against the static parts in `system` / `params`.
    pub fn restore(
        self,
        system: &SystemConfig,
        params: NonlocalityParams,
        options: tdqmc_core::engine::EngineOptions,
    ) -> Result<TdqmcState> {
        let n = system.n_electrons();
        let m = self.n_walkers;
        let g = system.grid.len();
        if self.guides.iter().any(|w| w.len() != 2 * g) {
            return Err(CliError::Config("checkpoint grid does not match its configuration".into()));
        }
        let streams = self
            .streams
            .iter()
            .map(|s| StreamState { seed: s.seed, stream: s.stream, word_pos: s.word_pos }.restore())
            .collect();
        let ensemble = WalkerEnsemble::from_parts(self.positions, system.spins.clone(), m, self.step_index, streams)?;
        let waves = self
            .guides
            .into_iter()
            .map(|w| Orbital::new(system.grid, w.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()))
            .collect();
        let guides = GuideWaveSet::from_parts(n, m, waves)?;
        Ok(TdqmcState {
            ensemble,
            guides,
            params,
            options,
            energy_trace: self.energy_trace,
            reference_spreads: self.reference_spreads,
            window: EnergyWindow {
                sums: self.window_sums,
                counts: self.window_counts,
                evaluations: self.window_evaluations,
            },
            energy: self.energy.map(|e| EnergyEstimate {
                mean: e.mean,
                std_error: e.std_error,
                excluded_fraction: e.excluded_fraction,
                exchange_correction: e.exchange_correction,
                samples: e.samples,
            }),
            resampled: self.resampled,
        })
    }
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&FORMAT.to_le_bytes());
        bincode::serialize_into(&mut bytes, self).map_err(|e| CliError::Io(e.to_string()))?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read checkpoint {}: {e}", path.display())))?;
        if bytes.len() < 12 || bytes[..8] != MAGIC {
            return Err(CliError::Usage(format!("{} is not a checkpoint file", path.display())));
        }
        let format = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if format != FORMAT {
            return Err(CliError::Usage(format!("unsupported checkpoint format {format}")));
        }
        bincode::deserialize(&bytes[12..]).map_err(|e| CliError::Usage(format!("corrupt checkpoint: {e}")))
    }

    pub fn config(&self) -> Result<Config> {
        config::parse(&self.config_text)
    }
}
