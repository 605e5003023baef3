//! Run configuration: a TOML file with dotted sections.
//!
//! ```toml
//! [system]
//! kind = "compensated"   # or "polarized", or give `spins` explicitly
//! electrons = 2
//! omega = 1.0
//!
//! [engine]
//! walkers = 5000
//! steps = 200
//!
//! [[nonlocality.pairs]]
//! from = 0
//! to = 1
//! sigma = 0.7
//! ```
//!
//! Electrons are numbered from 0. Every problem is reported with the dotted
//! path of the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tdqmc_core::engine::{DriftPolicy, EngineOptions, SigmaUpdate};
use tdqmc_core::experiments::{linear_values, ScanSpec, ScanVariable, SeriesKind, SeriesPlan, DEFAULT_FIT_DEGREE};
use tdqmc_core::model::{Nonlocality, NonlocalityParams, Spin, SystemConfig};
use tdqmc_core::numerics::{Grid1D, Stencil};
use tdqmc_core::oracle::{OracleOptions, Symmetry};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub system: SystemSection,
    pub grid: GridSection,
    pub engine: EngineSection,
    pub nonlocality: NonlocalitySection,
    pub scan: ScanSection,
    pub series: SeriesSection,
    pub oracle: OracleSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigKind {
    Polarized,
    Compensated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub kind: ConfigKind,
    pub electrons: Option<usize>,
    /// Explicit labels ("up" / "down"); overrides `kind`.
    pub spins: Option<Vec<String>>,
    pub omega: f64,
    pub softening: f64,
    pub coupling: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self { kind: ConfigKind::Polarized, electrons: None, spins: None, omega: 1.0, softening: 1.0, coupling: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub half_width: f64,
    pub points: usize,
    /// "five_point" or "three_point".
    pub stencil: String,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { half_width: 8.0, points: 256, stencil: "five_point".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSection {
    pub walkers: usize,
    pub steps: usize,
    pub dtau: f64,
    pub seed: u64,
    pub average_steps: usize,
    pub trace_every: usize,
    /// "per_step" or "frozen".
    pub sigma_update: String,
    /// "capped" or "raw".
    pub drift: String,
    pub frozen: Vec<usize>,
    pub energy_blocks: usize,
    /// Steps between checkpoints of the `run` command (0: none).
    pub checkpoint_every: usize,
}

impl Default for EngineSection {
    fn default() -> Self {
        let o = EngineOptions::default();
        let c = SystemConfig::new(vec![Spin::Up]);
        Self {
            walkers: c.n_walkers,
            steps: c.n_steps,
            dtau: c.dtau,
            seed: o.seed,
            average_steps: o.average_steps,
            trace_every: o.trace_every,
            sigma_update: "per_step".into(),
            drift: "capped".into(),
            frozen: Vec::new(),
            energy_blocks: o.energy_blocks,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlocalitySection {
    /// α for every pair not listed: a number, "inf" (mean field) or "local".
    pub default_alpha: toml::Value,
    pub pairs: Vec<PairEntry>,
}

impl Default for NonlocalitySection {
    fn default() -> Self {
        Self { default_alpha: toml::Value::String("inf".into()), pairs: Vec::new() }
    }
}

/// Window of electron `from`'s walkers as seen by electron `to`; exactly one
/// of `alpha` / `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub from: usize,
    pub to: usize,
    pub alpha: Option<toml::Value>,
    pub sigma: Option<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    /// "alpha" or "sigma".
    pub variable: String,
    /// "outer", "ground" or a list like "0:1,1:0".
    pub pairs: String,
    /// "lo:hi:count" or an explicit list.
    pub values: toml::Value,
    pub fit_degree: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            variable: "sigma".into(),
            pairs: "outer".into(),
            values: toml::Value::String("0.3:1.5:7".into()),
            fit_degree: DEFAULT_FIT_DEGREE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesSection {
    pub max_size: Option<usize>,
    /// Scan values; defaults depend on the series kind.
    pub values: Option<toml::Value>,
    pub fit_degree: usize,
    pub oracle_max_electrons: Option<usize>,
    pub check_frozen_shells: bool,
}

impl Default for SeriesSection {
    fn default() -> Self {
        Self {
            max_size: None,
            values: None,
            fit_degree: DEFAULT_FIT_DEGREE,
            oracle_max_electrons: None,
            check_frozen_shells: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    /// "auto", "antisymmetric", "symmetric" or "none".
    pub symmetry: String,
    pub half_width: Option<f64>,
    pub points: Option<usize>,
    pub dtau: f64,
    pub tolerance: f64,
    pub max_steps: usize,
    pub max_amplitudes: usize,
    /// Also solve on a grid with twice the points and record the change.
    pub refine: bool,
}

impl Default for OracleSection {
    fn default() -> Self {
        let o = OracleOptions::for_electrons(2);
        Self {
            symmetry: "auto".into(),
            half_width: None,
            points: None,
            dtau: o.dtau,
            tolerance: o.tolerance,
            max_steps: o.max_steps,
            max_amplitudes: o.max_amplitudes,
            refine: false,
        }
    }
}

fn field_error(path: &str, reason: impl Into<String>) -> CliError {
    CliError::Config(format!("{path}: {}", reason.into()))
}

/// Parses TOML text, reporting unknown or mistyped fields by path.
pub fn parse(text: &str) -> Result<Config, CliError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().to_string();
        if path.is_empty() || path == "." {
            CliError::Config(msg)
        } else {
            field_error(&path, msg)
        }
    })
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// Number, "inf"/"infinity" or "local".
fn parse_length(path: &str, v: &toml::Value) -> Result<f64, CliError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" | "mean_field" => Ok(f64::INFINITY),
            "local" | "0" => Ok(0.0),
            other => other.parse::<f64>().map_err(|_| field_error(path, format!("expected a number, \"inf\" or \"local\", got {s:?}"))),
        },
        other => Err(field_error(path, format!("expected a number or string, got {other}"))),
    }
}

/// "lo:hi:count" or a list of numbers.
pub fn parse_values(path: &str, v: &toml::Value) -> Result<Vec<f64>, CliError> {
    match v {
        toml::Value::String(s) => parse_range(s).map_err(|r| field_error(path, r)),
        toml::Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(q, x)| parse_length(&format!("{path}[{q}]"), x))
            .collect(),
        other => Err(field_error(path, format!("expected \"lo:hi:count\" or a list, got {other}"))),
    }
}

pub fn parse_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:count, got {s:?}"));
    }
    let lo: f64 = parts[0].parse().map_err(|_| format!("bad lower bound {:?}", parts[0]))?;
    let hi: f64 = parts[1].parse().map_err(|_| format!("bad upper bound {:?}", parts[1]))?;
    let count: usize = parts[2].parse().map_err(|_| format!("bad count {:?}", parts[2]))?;
    if count == 0 {
        return Err("scan has zero points".into());
    }
    Ok(linear_values(lo, hi, count))
}

/// "outer", "ground", or "j:i,j:i,...".
pub fn parse_pairs(spec: &str, n: usize) -> Result<Vec<(usize, usize)>, String> {
    match spec.trim() {
        "outer" => {
            if n < 2 {
                return Err("\"outer\" needs at least two electrons".into());
            }
            Ok(vec![(n - 2, n - 1), (n - 1, n - 2)])
        }
        "ground" => Ok((1..n).map(|i| (0, i)).collect()),
        list => list
            .split(',')
            .map(|p| {
                let (j, i) = p.split_once(':').ok_or_else(|| format!("bad pair {p:?}, expected j:i"))?;
                let j = j.trim().parse().map_err(|_| format!("bad electron index in {p:?}"))?;
                let i = i.trim().parse().map_err(|_| format!("bad electron index in {p:?}"))?;
                Ok((j, i))
            })
            .collect(),
    }
}

impl Config {
    pub fn spins(&self) -> Result<Vec<Spin>, CliError> {
        let s = &self.system;
        if let Some(labels) = &s.spins {
            if let Some(n) = s.electrons {
                if n != labels.len() {
                    return Err(field_error(
                        "system.spins",
                        format!("{} labels given for {n} electrons", labels.len()),
                    ));
                }
            }
            return labels
                .iter()
                .enumerate()
                .map(|(q, l)| match l.to_ascii_lowercase().as_str() {
                    "up" | "u" | "+" => Ok(Spin::Up),
                    "down" | "d" | "-" => Ok(Spin::Down),
                    other => Err(field_error(&format!("system.spins[{q}]"), format!("unknown spin {other:?}"))),
                })
                .collect();
        }
        let n = s.electrons.unwrap_or(1);
        match s.kind {
            ConfigKind::Polarized => Ok(vec![Spin::Up; n]),
            ConfigKind::Compensated => {
                if n % 2 != 0 {
                    return Err(field_error("system.electrons", format!("compensated shells need an even count, got {n}")));
                }
                Ok((0..n).map(|i| if i % 2 == 0 { Spin::Up } else { Spin::Down }).collect())
            }
        }
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Grid1D::symmetric(self.grid.half_width, self.grid.points).map_err(|e| field_error("grid", e.to_string()))
    }

    fn stencil(&self) -> Result<Stencil, CliError> {
        match self.grid.stencil.as_str() {
            "five_point" => Ok(Stencil::FivePoint),
            "three_point" => Ok(Stencil::ThreePoint),
            other => Err(field_error("grid.stencil", format!("expected \"five_point\" or \"three_point\", got {other:?}"))),
        }
    }

    pub fn system(&self) -> Result<SystemConfig, CliError> {
        let mut c = SystemConfig::new(self.spins()?);
        c.omega = self.system.omega;
        c.softening_a = self.system.softening;
        c.coupling = self.system.coupling;
        c.grid = self.grid()?;
        c.stencil = self.stencil()?;
        c.n_walkers = self.engine.walkers;
        c.n_steps = self.engine.steps;
        c.dtau = self.engine.dtau;
        c.validate().map_err(map_core_config)?;
        Ok(c)
    }

    pub fn engine_options(&self, seed: Option<u64>) -> Result<EngineOptions, CliError> {
        let e = &self.engine;
        let sigma_update = match e.sigma_update.as_str() {
            "per_step" => SigmaUpdate::PerStep,
            "frozen" => SigmaUpdate::Frozen,
            other => return Err(field_error("engine.sigma_update", format!("expected \"per_step\" or \"frozen\", got {other:?}"))),
        };
        let drift = match e.drift.as_str() {
            "capped" => DriftPolicy::Capped,
            "raw" => DriftPolicy::Raw,
            other => return Err(field_error("engine.drift", format!("expected \"capped\" or \"raw\", got {other:?}"))),
        };
        if e.average_steps == 0 || e.average_steps > e.steps {
            return Err(field_error("engine.average_steps", format!("must lie in 1..={}", e.steps)));
        }
        if e.energy_blocks < 2 {
            return Err(field_error("engine.energy_blocks", "need at least 2 blocks"));
        }
        Ok(EngineOptions {
            seed: seed.unwrap_or(e.seed),
            sigma_update,
            frozen: e.frozen.clone(),
            average_steps: e.average_steps,
            trace_every: e.trace_every,
            drift,
            energy_blocks: e.energy_blocks,
            ..EngineOptions::default()
        })
    }

    pub fn nonlocality(&self, n: usize) -> Result<NonlocalityParams, CliError> {
        let nl = &self.nonlocality;
        let default = parse_length("nonlocality.default_alpha", &nl.default_alpha)?;
        if default.is_nan() || default < 0.0 {
            return Err(field_error("nonlocality.default_alpha", "must be non-negative"));
        }
        let mut p = NonlocalityParams::uniform(n, Nonlocality::from_alpha(default));
        for (q, entry) in nl.pairs.iter().enumerate() {
            let path = format!("nonlocality.pairs[{q}]");
            if entry.from >= n || entry.to >= n || entry.from == entry.to {
                return Err(field_error(&path, format!("({}, {}) is not a pair of distinct electrons below {n}", entry.from, entry.to)));
            }
            let value = match (&entry.alpha, &entry.sigma) {
                (Some(a), None) => Nonlocality::from_alpha(check_length(&format!("{path}.alpha"), a)?),
                (None, Some(s)) => Nonlocality::from_sigma(check_length(&format!("{path}.sigma"), s)?),
                _ => return Err(field_error(&path, "give exactly one of `alpha` or `sigma`")),
            };
            p.set(entry.from, entry.to, value);
        }
        Ok(p)
    }

    pub fn scan_spec(&self, n: usize) -> Result<ScanSpec, CliError> {
        let s = &self.scan;
        let variable = match s.variable.as_str() {
            "alpha" => ScanVariable::Alpha,
            "sigma" => ScanVariable::Sigma,
            other => return Err(field_error("scan.variable", format!("expected \"alpha\" or \"sigma\", got {other:?}"))),
        };
        let pairs = parse_pairs(&s.pairs, n).map_err(|r| field_error("scan.pairs", r))?;
        let values = parse_values("scan.values", &s.values)?;
        Ok(ScanSpec { variable, pairs, values, fit_degree: s.fit_degree })
    }

    pub fn series_plan(&self, kind: SeriesKind, seed: Option<u64>) -> Result<SeriesPlan, CliError> {
        let mut plan = SeriesPlan::new(kind);
        if let Some(v) = &self.series.values {
            plan.scan_values = parse_values("series.values", v)?;
        }
        plan.fit_degree = self.series.fit_degree;
        if let Some(m) = self.series.oracle_max_electrons {
            plan.oracle_max_electrons = m;
        }
        plan.check_frozen_shells = self.series.check_frozen_shells;
        plan.options = self.engine_options(seed)?;
        Ok(plan)
    }

    pub fn oracle(&self, n: usize, spins: &[Spin]) -> Result<(OracleOptions, Symmetry), CliError> {
        let o = &self.oracle;
        let mut opts = OracleOptions::for_electrons(n);
        if o.half_width.is_some() || o.points.is_some() {
            let hw = o.half_width.unwrap_or(opts.grid.x_max());
            let pts = o.points.unwrap_or(opts.grid.len());
            opts.grid = Grid1D::symmetric(hw, pts).map_err(|e| field_error("oracle", e.to_string()))?;
        }
        opts.dtau = o.dtau;
        opts.tolerance = o.tolerance;
        opts.max_steps = o.max_steps;
        opts.max_amplitudes = o.max_amplitudes;
        opts.stencil = self.stencil()?;
        let symmetry = match o.symmetry.as_str() {
            "auto" => auto_symmetry(spins),
            "antisymmetric" => Symmetry::Antisymmetric,
            "symmetric" => Symmetry::Symmetric,
            "none" => Symmetry::None,
            other => return Err(field_error("oracle.symmetry", format!("unknown symmetry {other:?}"))),
        };
        Ok((opts, symmetry))
    }
}

/// Spatially symmetric for a two-electron singlet, antisymmetric within
/// spin blocks otherwise.
pub fn auto_symmetry(spins: &[Spin]) -> Symmetry {
    if spins.len() == 2 && spins[0] != spins[1] {
        Symmetry::Symmetric
    } else {
        Symmetry::Antisymmetric
    }
}

fn check_length(path: &str, v: &toml::Value) -> Result<f64, CliError> {
    let x = parse_length(path, v)?;
    if x.is_nan() || x < 0.0 {
        return Err(field_error(path, "must be non-negative"));
    }
    Ok(x)
}

/// Core field names mapped onto config paths.
fn map_core_config(e: tdqmc_core::Error) -> CliError {
    match e {
        tdqmc_core::Error::InvalidConfig { field, reason } => {
            let path = match field {
                "spins" => "system.spins",
                "omega" => "system.omega",
                "softening_a" => "system.softening",
                "coupling" => "system.coupling",
                "n_walkers" => "engine.walkers",
                "dtau" => "engine.dtau",
                other => other,
            };
            field_error(path, reason)
        }
        other => CliError::Config(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = parse("").unwrap();
        let s = c.system().unwrap();
        assert_eq!(s.n_electrons(), 1);
        assert_eq!(s.grid.len(), 256);
        assert_eq!(s.n_walkers, 5000);
    }

    #[test]
    fn unknown_field_names_its_path() {
        let err = parse("[engine]\nwalkres = 10\n").unwrap_err().to_string();
        assert!(err.contains("engine"), "{err}");
        let err = parse("[system]\nomega = \"x\"\n").unwrap_err().to_string();
        assert!(err.contains("system.omega"), "{err}");
    }

    #[test]
    fn spin_count_mismatch_names_spins() {
        let c = parse("[system]\nelectrons = 3\nspins = [\"up\", \"down\"]\n").unwrap();
        let err = c.system().unwrap_err().to_string();
        assert!(err.contains("system.spins"), "{err}");
    }

    #[test]
    fn compensated_spins_alternate() {
        let c = parse("[system]\nkind = \"compensated\"\nelectrons = 4\n").unwrap();
        assert_eq!(c.spins().unwrap(), vec![Spin::Up, Spin::Down, Spin::Up, Spin::Down]);
    }

    #[test]
    fn pair_table_and_ranges() {
        let c = parse(
            "[nonlocality]\ndefault_alpha = \"inf\"\n[[nonlocality.pairs]]\nfrom = 0\nto = 1\nsigma = 0.7\n",
        )
        .unwrap();
        let p = c.nonlocality(2).unwrap();
        assert_eq!(p.get(0, 1), Nonlocality::Sigma(0.7));
        assert_eq!(p.get(1, 0), Nonlocality::MeanField);
        assert_eq!(parse_range("0.2:2.0:10").unwrap().len(), 10);
        assert!(parse_range("0.2:2.0:0").is_err());
        assert_eq!(parse_pairs("outer", 4).unwrap(), vec![(2, 3), (3, 2)]);
        assert_eq!(parse_pairs("0:1, 2:1", 3).unwrap(), vec![(0, 1), (2, 1)]);
    }

    #[test]
    fn walker_floor_maps_to_engine_path() {
        let c = parse("[engine]\nwalkers = 3\n").unwrap();
        assert!(c.system().unwrap_err().to_string().contains("engine.walkers"));
    }
}
