//! Versioned oracle reference file: system fingerprint → converged values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tdqmc_core::entanglement::{linear_entropy_distinguishable, linear_entropy_identical};
use tdqmc_core::model::{Spin, SystemConfig};
use tdqmc_core::numerics::{Grid1D, Stencil};
use tdqmc_core::oracle::{exact_ground_state, exact_one_body_rdm, OracleOptions, Symmetry};

use crate::manifest::sha256_hex;
use crate::{CliError, Result};

pub const VERSION: u32 = 1;

/// Everything that determines an oracle result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFingerprint {
    pub spins: Vec<String>,
    pub omega: f64,
    pub softening: f64,
    pub coupling: f64,
    pub symmetry: String,
    pub half_width: f64,
    pub points: usize,
    pub stencil: String,
    pub dtau: f64,
    pub tolerance: f64,
}

impl SystemFingerprint {
    pub fn new(system: &SystemConfig, symmetry: Symmetry, opts: &OracleOptions) -> Self {
        Self {
            spins: system.spins.iter().map(|s| s.label().to_string()).collect(),
            omega: system.omega,
            softening: system.softening_a,
            coupling: system.coupling,
            symmetry: symmetry_label(symmetry).into(),
            half_width: opts.grid.x_max(),
            points: opts.grid.len(),
            stencil: stencil_label(opts.stencil).into(),
            dtau: opts.dtau,
            tolerance: opts.tolerance,
        }
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("fingerprint serializes"))[..16].to_string()
    }
}

pub fn symmetry_label(s: Symmetry) -> &'static str {
    match s {
        Symmetry::Antisymmetric => "antisymmetric",
        Symmetry::Symmetric => "symmetric",
        Symmetry::None => "none",
    }
}

fn stencil_label(s: Stencil) -> &'static str {
    match s {
        Stencil::FivePoint => "five_point",
        Stencil::ThreePoint => "three_point",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub points: usize,
    pub energy: f64,
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub label: String,
    pub system: SystemFingerprint,
    pub energy: f64,
    pub steps: usize,
    /// 1 − N_σ Tr ρ² per spin block present, keyed "up" / "down".
    pub entropy_identical: BTreeMap<String, f64>,
    pub entropy_distinguishable: Vec<f64>,
    pub refinement: Option<Refinement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFile {
    pub version: u32,
    pub entries: BTreeMap<String, ReferenceEntry>,
}

impl Default for ReferenceFile {
    fn default() -> Self {
        Self { version: VERSION, entries: BTreeMap::new() }
    }
}

impl ReferenceFile {
    /// Missing file reads as empty.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path)?;
        let file: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: not a reference file: {e}", path.display())))?;
        if file.version != VERSION {
            return Err(CliError::Config(format!("{}: unsupported reference version {}", path.display(), file.version)));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Inserts under the entry's fingerprint, replacing an older entry for
    /// the same system.
    pub fn insert(&mut self, entry: ReferenceEntry) -> String {
        let key = entry.system.hash();
        self.entries.insert(key.clone(), entry);
        key
    }

    pub fn get(&self, fingerprint: &SystemFingerprint) -> Option<&ReferenceEntry> {
        self.entries.get(&fingerprint.hash())
    }

    pub fn by_label(&self, label: &str) -> Option<&ReferenceEntry> {
        self.entries.values().find(|e| e.label == label)
    }
}

/// Solves the system on the oracle grid and collects the reference values;
/// with `refine`, repeats on a grid with twice the points.
pub fn solve(
    label: &str,
    system: &SystemConfig,
    symmetry: Symmetry,
    opts: &OracleOptions,
    refine: bool,
) -> Result<ReferenceEntry> {
    let res = exact_ground_state(system, symmetry, opts)?;
    let n = system.n_electrons();
    let entropy_distinguishable = (0..n)
        .map(|i| exact_one_body_rdm(&res.psi, i).map(|r| linear_entropy_distinguishable(&r)))
        .collect::<tdqmc_core::Result<Vec<f64>>>()?;
    let mut entropy_identical = BTreeMap::new();
    for spin in [Spin::Up, Spin::Down] {
        let n_same = system.spins.iter().filter(|s| **s == spin).count();
        if let Some(first) = system.spins.iter().position(|s| *s == spin) {
            let rho = exact_one_body_rdm(&res.psi, first)?;
            entropy_identical.insert(spin.label().to_string(), linear_entropy_identical(&rho, n_same).raw);
        }
    }
    let refinement = if refine {
        let fine = OracleOptions { grid: Grid1D::symmetric(opts.grid.x_max(), 2 * opts.grid.len())?, ..*opts };
        let e = exact_ground_state(system, symmetry, &fine)?.energy;
        Some(Refinement { points: fine.grid.len(), energy: e, change: (e - res.energy).abs() })
    } else {
        None
    };
    Ok(ReferenceEntry {
        label: label.to_string(),
        system: SystemFingerprint::new(system, symmetry, opts),
        energy: res.energy,
        steps: res.steps,
        entropy_identical,
        entropy_distinguishable,
        refinement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noninteracting_pair_and_file_round_trip() {
        let mut sys = SystemConfig::spin_polarized(2);
        sys.coupling = 0.0;
        let opts = OracleOptions::with_grid(Grid1D::symmetric(6.0, 48).unwrap());
        let entry = solve("free2", &sys, Symmetry::Antisymmetric, &opts, false).unwrap();
        assert!((entry.energy - 2.0).abs() < 2e-3, "{}", entry.energy);
        assert!(entry.entropy_identical["up"].abs() < 1e-8);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ref.json");
        let mut file = ReferenceFile::load(&path).unwrap();
        let key = file.insert(entry.clone());
        file.save(&path).unwrap();
        let back = ReferenceFile::load(&path).unwrap();
        assert_eq!(back.entries[&key], entry);
        assert_eq!(back.get(&entry.system), Some(&entry));
    }
}
