//! Command dispatch. Every command resolves its configuration, builds a
//! manifest, runs the solver and writes CSV tables stamped with the manifest
//! hash into the output directory.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tdqmc_core::engine::TdqmcState;
use tdqmc_core::experiments::{
    alpha_scan_from, observe, Observables, ScanResult, SeriesKind, SeriesReport,
};
use tdqmc_core::hartree_fock::hf_solve;
use tdqmc_core::model::Spin;

use crate::checkpoint::{Checkpoint, StateParts};
use crate::config::{self, Config};
use crate::manifest::RunManifest;
use crate::output::{num, opt, rdm_table, Table};
use crate::reference::{self, symmetry_label, ReferenceFile};
use crate::{CliError, Result};

pub const DEFAULT_OUT_DIR: &str = "tdqmc-out";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const REFERENCE_FILE: &str = "oracle_reference.json";

#[derive(Debug, Parser)]
#[command(name = "tdqmc", version, about = "Time-dependent quantum Monte Carlo for electrons in 1D quantum dots")]
pub struct Cli {
    /// Master seed (overrides `engine.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "TDQMC_OUT")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; affects wall time only.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Polarized,
    Compensated,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hartree-Fock ground state: energy report and orbitals.
    Hf { config: PathBuf },
    /// Energy scan over one nonlocality parameter with a polynomial fit.
    Scan {
        config: PathBuf,
        /// "outer", "ground" or "j:i,j:i,..." (electrons numbered from 0).
        #[arg(long)]
        pairs: Option<String>,
        /// Scan α over lo:hi:count.
        #[arg(long, conflicts_with = "sigma")]
        alpha: Option<String>,
        /// Scan σ over lo:hi:count.
        #[arg(long)]
        sigma: Option<String>,
        #[arg(long)]
        fit_degree: Option<usize>,
    },
    /// Spin-polarized or spin-compensated series of scans.
    Series {
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Largest number of levels (polarized) or shells (compensated).
        #[arg(long)]
        max: Option<usize>,
    },
    /// Tensor-grid reference solve, recorded in the reference file.
    Oracle {
        config: PathBuf,
        /// Reference file to update (default: <out-dir>/oracle_reference.json).
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
    },
    /// A single propagation with the configured nonlocality, checkpointed.
    Run {
        config: PathBuf,
        /// Steps between checkpoints (overrides `engine.checkpoint_every`).
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// Stop after this step, leaving a checkpoint behind.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Continue a run from a checkpoint file.
    Resume {
        checkpoint: PathBuf,
        #[arg(long)]
        checkpoint_every: Option<usize>,
        #[arg(long)]
        stop_after: Option<usize>,
    },
}

/// Files written and a human-readable summary.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl Report {
    pub fn file(&self, name: &str) -> Option<&PathBuf> {
        self.files.iter().find(|p| p.file_name().is_some_and(|f| f == name))
    }
}

struct Env {
    seed: Option<u64>,
    out_dir: PathBuf,
}

/// Runs the parsed command, inside a pool of `--threads` workers if given.
pub fn execute(cli: &Cli) -> Result<Report> {
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    std::fs::create_dir_all(&out_dir)?;
    let env = Env { seed: cli.seed, out_dir };
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(&cli.command, &env)),
        None => dispatch(&cli.command, &env),
    }
}

fn dispatch(command: &Command, env: &Env) -> Result<Report> {
    match command {
        Command::Hf { config } => cmd_hf(&config::load(config)?, env),
        Command::Scan { config, pairs, alpha, sigma, fit_degree } => {
            let cfg = config::load(config)?;
            cmd_scan(&cfg, env, pairs.as_deref(), alpha.as_deref(), sigma.as_deref(), *fit_degree)
        }
        Command::Series { config, kind, max } => cmd_series(&config::load(config)?, env, *kind, *max),
        Command::Oracle { config, reference, label } => {
            cmd_oracle(&config::load(config)?, env, reference.as_deref(), label.as_deref())
        }
        Command::Run { config, checkpoint_every, stop_after } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
            cmd_run(&text, env, *checkpoint_every, *stop_after)
        }
        Command::Resume { checkpoint, checkpoint_every, stop_after } => {
            cmd_resume(checkpoint, env, *checkpoint_every, *stop_after)
        }
    }
}

fn seed_of(cfg: &Config, env: &Env) -> u64 {
    env.seed.unwrap_or(cfg.engine.seed)
}

fn finish(mut manifest: RunManifest, dir: &Path, files: Vec<PathBuf>, lines: Vec<String>) -> Result<Report> {
    manifest.outputs = files.clone();
    let mut files = files;
    files.push(manifest.finish(dir)?);
    Ok(Report { out_dir: dir.to_path_buf(), files, lines })
}

fn cmd_hf(cfg: &Config, env: &Env) -> Result<Report> {
    let system = cfg.system()?;
    let hf = hf_solve(&system)?;
    let manifest = RunManifest::new("hf", json!({}), seed_of(cfg, env), cfg);
    let e = hf.energy;
    let mut energy = Table::new(&["component", "value"]).meta("steps", hf.steps);
    for (k, v) in [
        ("kinetic", e.kinetic),
        ("external", e.external),
        ("hartree", e.hartree),
        ("exchange", e.exchange),
        ("total", e.total),
    ] {
        energy.row(vec![k.into(), num(v)]);
    }
    let mut header = vec!["x".to_string()];
    for i in 0..hf.orbitals.len() {
        header.push(format!("phi{i}_re"));
        header.push(format!("phi{i}_im"));
    }
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut orbitals = Table::new(&hdr);
    for a in 0..system.grid.len() {
        let mut row = vec![num(system.grid.x(a))];
        for o in &hf.orbitals {
            row.push(num(o.values()[a].re));
            row.push(num(o.values()[a].im));
        }
        orbitals.row(row);
    }
    let dir = &env.out_dir;
    let files = vec![energy.write(dir, "hf_energy.csv", &manifest.hash)?, orbitals.write(dir, "hf_orbitals.csv", &manifest.hash)?];
    let lines = vec![format!("HF energy {:.8} ({} steps)", e.total, hf.steps)];
    finish(manifest, dir, files, lines)
}

fn observable_header(obs: &Observables) -> Vec<String> {
    let mut h: Vec<String> = obs.identical.iter().map(|b| format!("entropy_identical_{}", b.spin.label())).collect();
    h.extend((0..obs.distinguishable.len()).map(|i| format!("entropy_distinguishable_{i}")));
    h.extend((0..obs.spreads.len()).map(|i| format!("spread_{i}")));
    h
}

fn observable_cells(obs: &Observables) -> Vec<String> {
    let mut c: Vec<String> = obs.identical.iter().map(|b| num(b.entropy.raw)).collect();
    c.extend(obs.distinguishable.iter().map(|v| num(*v)));
    c.extend(obs.spreads.iter().map(|v| num(*v)));
    c
}

/// One row per scan point plus the fit.
pub fn scan_table(scan: &ScanResult) -> Table {
    let mut header: Vec<String> =
        ["value", "energy", "std_error", "fit_energy", "excluded_fraction"].iter().map(|s| s.to_string()).collect();
    header.extend(observable_header(&scan.points[0].observables));
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    let pairs: Vec<String> = scan.spec.pairs.iter().map(|(j, i)| format!("{j}:{i}")).collect();
    let mut t = Table::new(&hdr)
        .meta("variable", scan.spec.variable.label())
        .meta("pairs", pairs.join(","))
        .meta("seed", scan.seed)
        .meta("fit_degree", scan.spec.fit_degree)
        .meta("minimum", format!("{},{}", num(scan.minimum.0), num(scan.minimum.1)))
        .meta("minimum_std_error", num(scan.minimum_std_error()))
        .meta("raw_minimum", format!("{},{}", num(scan.raw_minimum.0), num(scan.raw_minimum.1)))
        .meta("boundary_minimum", scan.boundary_minimum)
        .meta("residual_rms", num(scan.residual_rms))
        .meta("median_std_error", num(scan.median_std_error))
        .meta("fit_within_noise", scan.fit_within_noise());
    for p in &scan.points {
        let mut row = vec![
            num(p.value),
            num(p.energy.mean),
            num(p.energy.std_error),
            num(scan.fit.eval(p.value)),
            num(p.energy.excluded_fraction),
        ];
        row.extend(observable_cells(&p.observables));
        t.row(row);
    }
    t
}

fn scan_args(flag: &str, text: &str) -> Result<Vec<f64>> {
    config::parse_range(text).map_err(|r| CliError::Usage(format!("{flag}: {r}")))
}

fn cmd_scan(
    cfg: &Config,
    env: &Env,
    pairs: Option<&str>,
    alpha: Option<&str>,
    sigma: Option<&str>,
    fit_degree: Option<usize>,
) -> Result<Report> {
    let system = cfg.system()?;
    let n = system.n_electrons();
    let mut spec = cfg.scan_spec(n)?;
    if let Some(p) = pairs {
        spec.pairs = config::parse_pairs(p, n).map_err(|r| CliError::Usage(format!("--pairs: {r}")))?;
    }
    if let Some(a) = alpha {
        spec.variable = tdqmc_core::experiments::ScanVariable::Alpha;
        spec.values = scan_args("--alpha", a)?;
    }
    if let Some(s) = sigma {
        spec.variable = tdqmc_core::experiments::ScanVariable::Sigma;
        spec.values = scan_args("--sigma", s)?;
    }
    if let Some(d) = fit_degree {
        spec.fit_degree = d;
    }
    spec.validate(n)?;
    let seed = seed_of(cfg, env);
    let options = cfg.engine_options(Some(seed))?;
    let base = cfg.nonlocality(n)?;
    let args = json!({
        "variable": spec.variable.label(),
        "pairs": spec.pairs,
        "values": spec.values,
        "fit_degree": spec.fit_degree,
    });
    let manifest = RunManifest::new("scan", args, seed, cfg);
    let hf = hf_solve(&system)?;
    let scan = alpha_scan_from(&system, &spec, &base, &options, &hf.orbitals)?;
    let dir = &env.out_dir;
    let mut files = vec![scan_table(&scan).write(dir, &format!("fig3_scan_N{n}.csv"), &manifest.hash)?];
    let best = &scan.points[scan.nearest].observables;
    for b in &best.identical {
        files.push(rdm_table(&b.rdm).write(dir, &format!("rdm_scan_N{n}_{}.csv", b.spin.label()), &manifest.hash)?);
    }
    let mut lines = vec![format!(
        "minimum {} = {:.4}: E = {:.6} ± {:.6} (HF {:.6}){}",
        spec.variable.label(),
        scan.minimum.0,
        scan.minimum.1,
        scan.minimum_std_error(),
        hf.energy.total,
        if scan.boundary_minimum { ", boundary minimum" } else { "" }
    )];
    if !scan.fit_within_noise() {
        lines.push(format!(
            "warning: fit residual {:.2e} exceeds 3× the median standard error {:.2e}",
            scan.residual_rms, scan.median_std_error
        ));
    }
    finish(manifest, dir, files, lines)
}

fn cmd_series(cfg: &Config, env: &Env, kind: KindArg, max: Option<usize>) -> Result<Report> {
    let kind = match kind {
        KindArg::Polarized => SeriesKind::Polarized,
        KindArg::Compensated => SeriesKind::Compensated,
    };
    let max = max.or(cfg.series.max_size).unwrap_or(match kind {
        SeriesKind::Polarized => 4,
        SeriesKind::Compensated => 5,
    });
    if max == 0 {
        return Err(CliError::Usage("--max must be at least 1".into()));
    }
    let seed = seed_of(cfg, env);
    let plan = cfg.series_plan(kind, Some(seed))?;
    let base = cfg.system()?;
    let args = json!({ "kind": kind.label(), "max": max, "values": plan.scan_values });
    let manifest = RunManifest::new("series", args, seed, cfg);
    let report = match kind {
        SeriesKind::Polarized => tdqmc_core::experiments::spin_polarized_series(&base, max, &plan)?,
        SeriesKind::Compensated => tdqmc_core::experiments::spin_compensated_series(&base, max, &plan)?,
    };
    let dir = &env.out_dir;
    let hash = &manifest.hash;
    let mut files = match kind {
        SeriesKind::Polarized => polarized_tables(&report)?
            .into_iter()
            .map(|(name, t)| t.write(dir, name, hash))
            .collect::<Result<Vec<_>>>()?,
        SeriesKind::Compensated => compensated_tables(&report)?
            .into_iter()
            .map(|(name, t)| t.write(dir, name, hash))
            .collect::<Result<Vec<_>>>()?,
    };
    for row in &report.rows {
        if let Some(scan) = &row.scan {
            files.push(scan_table(scan).write(dir, &format!("fig3_scan_N{}.csv", row.n_electrons), hash)?);
        }
        files.push(rdm_table(&row.rdm).write(dir, &format!("rdm_N{}.csv", row.n_electrons), hash)?);
    }
    let summary = series_summary(&report, seed);
    let path = dir.join("series_summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))? + "\n")?;
    files.push(path);
    let mut lines: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "N={}: E = {:.6} ± {:.6}, HF {:.6}, oracle {}, S_id = {:.5}, alpha* = {:.3}, sigma* = {:.3}{}",
                r.n_electrons,
                r.energy,
                r.std_error,
                r.hf_energy,
                r.oracle.as_ref().map_or("-".into(), |o| format!("{:.6}", o.energy)),
                r.entropy_identical.raw,
                r.alpha_star,
                r.sigma_star,
                if r.boundary_minimum { " (boundary minimum)" } else { "" }
            )
        })
        .collect();
    if !report.all_below_hf() {
        lines.push("warning: a row lies above its Hartree-Fock energy by more than 3 standard errors".into());
    }
    finish(manifest, dir, files, lines)
}

fn series_summary(report: &SeriesReport, seed: u64) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "size": r.size,
                "n_electrons": r.n_electrons,
                "energy": r.energy,
                "std_error": r.std_error,
                "hf_energy": r.hf_energy,
                "oracle_energy": r.oracle.as_ref().map(|o| o.energy),
                "oracle_entropy_identical": r.oracle.as_ref().map(|o| o.entropy_identical),
                "entropy_identical": r.entropy_identical.raw,
                "entropy_distinguishable": r.entropy_distinguishable,
                "alpha_star": r.alpha_star,
                "sigma_star": r.sigma_star,
                "boundary_minimum": r.boundary_minimum,
                "unfrozen_energy": r.unfrozen.map(|e| e.mean),
                "unfrozen_std_error": r.unfrozen.map(|e| e.std_error),
            })
        })
        .collect();
    json!({
        "kind": report.kind.label(),
        "seed": seed,
        "all_below_hf": report.all_below_hf(),
        "energy_monotone": report.energy_monotone(),
        "entropy_spread": report.entropy_spread(),
        "alpha_star_deviation": report.alpha_star_deviation(),
        "rows": rows,
    })
}

pub fn polarized_tables(report: &SeriesReport) -> Result<Vec<(&'static str, Table)>> {
    let mut energy = Table::new(&["n_electrons", "energy", "std_error", "hf_energy", "oracle_energy"])
        .meta("all_below_hf", report.all_below_hf());
    let mut entropy = Table::new(&[
        "n_electrons",
        "electron",
        "entropy_identical",
        "oracle_entropy_identical",
        "entropy_distinguishable",
        "oracle_entropy_distinguishable",
    ])
    .meta("entropy_spread", num(report.entropy_spread()));
    let mut alpha = Table::new(&["n_electrons", "alpha_star", "sigma_star", "boundary_minimum"])
        .meta("alpha_star_deviation", num(report.alpha_star_deviation()));
    for r in &report.rows {
        let o = r.oracle.as_ref();
        energy.row(vec![
            r.n_electrons.to_string(),
            num(r.energy),
            num(r.std_error),
            num(r.hf_energy),
            opt(o.map(|o| o.energy)),
        ]);
        for (i, s) in r.entropy_distinguishable.iter().enumerate() {
            entropy.row(vec![
                r.n_electrons.to_string(),
                i.to_string(),
                num(r.entropy_identical.raw),
                opt(o.map(|o| o.entropy_identical)),
                num(*s),
                opt(o.and_then(|o| o.entropy_distinguishable.get(i).copied())),
            ]);
        }
        alpha.row(vec![r.n_electrons.to_string(), num(r.alpha_star), num(r.sigma_star), r.boundary_minimum.to_string()]);
    }
    Ok(vec![("fig2a_energy.csv", energy), ("fig2b_entropy.csv", entropy), ("fig2c_alpha.csv", alpha)])
}

pub fn compensated_tables(report: &SeriesReport) -> Result<Vec<(&'static str, Table)>> {
    let mut energy = Table::new(&[
        "shells",
        "n_electrons",
        "energy",
        "std_error",
        "hf_energy",
        "oracle_energy",
        "unfrozen_energy",
        "unfrozen_std_error",
    ])
    .meta("all_below_hf", report.all_below_hf())
    .meta("energy_monotone", report.energy_monotone());
    let mut entropy = Table::new(&[
        "shells",
        "n_electrons",
        "entropy_identical",
        "oracle_entropy_identical",
        "entropy_distinguishable_outer",
        "oracle_entropy_distinguishable_outer",
    ]);
    let mut sigma = Table::new(&["shells", "n_electrons", "sigma_star", "alpha_star", "boundary_minimum"]);
    for r in &report.rows {
        let o = r.oracle.as_ref();
        let outer = r.n_electrons - 1;
        energy.row(vec![
            r.size.to_string(),
            r.n_electrons.to_string(),
            num(r.energy),
            num(r.std_error),
            num(r.hf_energy),
            opt(o.map(|o| o.energy)),
            opt(r.unfrozen.map(|e| e.mean)),
            opt(r.unfrozen.map(|e| e.std_error)),
        ]);
        entropy.row(vec![
            r.size.to_string(),
            r.n_electrons.to_string(),
            num(r.entropy_identical.raw),
            opt(o.map(|o| o.entropy_identical)),
            opt(r.entropy_distinguishable.get(outer).copied()),
            opt(o.and_then(|o| o.entropy_distinguishable.get(outer).copied())),
        ]);
        sigma.row(vec![
            r.size.to_string(),
            r.n_electrons.to_string(),
            num(r.sigma_star),
            num(r.alpha_star),
            r.boundary_minimum.to_string(),
        ]);
    }
    Ok(vec![("fig4a_energy.csv", energy), ("fig4b_entropy.csv", entropy), ("fig4c_sigma.csv", sigma)])
}

fn cmd_oracle(cfg: &Config, env: &Env, reference_path: Option<&Path>, label: Option<&str>) -> Result<Report> {
    let system = cfg.system()?;
    let (opts, symmetry) = cfg.oracle(system.n_electrons(), &system.spins)?;
    let label = label.map(str::to_string).unwrap_or_else(|| {
        let spins: String = system.spins.iter().map(|s| if *s == Spin::Up { 'u' } else { 'd' }).collect();
        format!("{spins}-{}-G{}", symmetry_label(symmetry), opts.grid.len())
    });
    let path = reference_path.map(Path::to_path_buf).unwrap_or_else(|| env.out_dir.join(REFERENCE_FILE));
    let manifest = RunManifest::new("oracle", json!({ "label": label }), seed_of(cfg, env), cfg);
    let mut file = ReferenceFile::load(&path)?;
    let entry = reference::solve(&label, &system, symmetry, &opts, cfg.oracle.refine)?;
    let mut lines = vec![format!(
        "{label}: E = {:.8} after {} steps, S_id = {:?}, S = {:?}",
        entry.energy, entry.steps, entry.entropy_identical, entry.entropy_distinguishable
    )];
    if let Some(r) = &entry.refinement {
        lines.push(format!("refined on {} points: E = {:.8} (change {:.2e})", r.points, r.energy, r.change));
    }
    let key = file.insert(entry);
    file.save(&path)?;
    lines.push(format!("recorded as {key} in {}", path.display()));
    finish(manifest, &env.out_dir, vec![path], lines)
}

/// Static parts of a run rebuilt from its configuration text.
struct RunSetup {
    cfg: Config,
    system: tdqmc_core::model::SystemConfig,
    params: tdqmc_core::model::NonlocalityParams,
    options: tdqmc_core::engine::EngineOptions,
    manifest: RunManifest,
}

fn run_setup(text: &str, seed: Option<u64>) -> Result<RunSetup> {
    let cfg = config::parse(text)?;
    let system = cfg.system()?;
    let params = cfg.nonlocality(system.n_electrons())?;
    let options = cfg.engine_options(seed)?;
    let manifest = RunManifest::new("run", json!({}), options.seed, &cfg);
    Ok(RunSetup { cfg, system, params, options, manifest })
}

fn cmd_run(text: &str, env: &Env, every: Option<usize>, stop_after: Option<usize>) -> Result<Report> {
    let setup = run_setup(text, env.seed)?;
    let hf = hf_solve(&setup.system)?;
    let state = TdqmcState::new(&setup.system, setup.params.clone(), setup.options.clone(), &hf.orbitals)?;
    let every = every.unwrap_or(setup.cfg.engine.checkpoint_every);
    advance(text, env.seed, setup, state, env, every, stop_after)
}

fn cmd_resume(path: &Path, env: &Env, every: Option<usize>, stop_after: Option<usize>) -> Result<Report> {
    let ck = Checkpoint::load(path)?;
    if env.seed.is_some() && env.seed != ck.seed_override {
        return Err(CliError::Usage("--seed cannot change on resume".into()));
    }
    let setup = run_setup(&ck.config_text, ck.seed_override)?;
    if setup.manifest.hash != ck.manifest_hash {
        return Err(CliError::Config("checkpoint was written by a different code version".into()));
    }
    let state = ck.state.restore(&setup.system, setup.params.clone(), setup.options.clone())?;
    let every = every.unwrap_or(setup.cfg.engine.checkpoint_every);
    advance(&ck.config_text, ck.seed_override, setup, state, env, every, stop_after)
}

fn advance(
    text: &str,
    seed_override: Option<u64>,
    setup: RunSetup,
    mut state: TdqmcState,
    env: &Env,
    every: usize,
    stop_after: Option<usize>,
) -> Result<Report> {
    let system = &setup.system;
    let end = system.n_steps;
    let stop = stop_after.unwrap_or(end).min(end);
    let ck_path = env.out_dir.join(CHECKPOINT_FILE);
    let save = |state: &TdqmcState| -> Result<()> {
        Checkpoint {
            config_text: text.to_string(),
            seed_override,
            manifest_hash: setup.manifest.hash.clone(),
            state: StateParts::capture(state),
        }
        .save(&ck_path)
    };
    while state.step_index() < stop {
        let next = if every > 0 { ((state.step_index() / every + 1) * every).min(stop) } else { stop };
        state.run_until(system, next)?;
        if every > 0 && state.step_index() < end {
            save(&state)?;
        }
    }
    if state.step_index() < end {
        save(&state)?;
        let lines = vec![format!("stopped at step {} of {end}; checkpoint {}", state.step_index(), ck_path.display())];
        return Ok(Report { out_dir: env.out_dir.clone(), files: vec![ck_path], lines });
    }
    if state.energy.is_none() {
        state.run(system)?;
    }
    run_outputs(setup, &state, env)
}

fn run_outputs(setup: RunSetup, state: &TdqmcState, env: &Env) -> Result<Report> {
    let system = &setup.system;
    let e = state.energy.ok_or(CliError::Numerical("run ended without an energy estimate".into()))?;
    let obs = observe(state, system)?;
    let hash = setup.manifest.hash.clone();
    let dir = &env.out_dir;
    let mut trace = Table::new(&["step", "energy"])
        .meta("energy", num(e.mean))
        .meta("std_error", num(e.std_error))
        .meta("excluded_fraction", num(e.excluded_fraction))
        .meta("exchange_correction", num(e.exchange_correction))
        .meta("samples", e.samples)
        .meta("resampled", state.resampled);
    for (s, v) in &state.energy_trace {
        trace.row(vec![s.to_string(), num(*v)]);
    }
    let mut ent = Table::new(&["electron", "spin", "entropy_distinguishable", "spread"])
        .meta("orthonormality_error", num(obs.orthonormality_error))
        .meta("slater_fallbacks", obs.slater_fallbacks);
    for b in &obs.identical {
        ent = ent.meta(&format!("entropy_identical_{}", b.spin.label()), num(b.entropy.raw));
    }
    for (i, (s, sp)) in obs.distinguishable.iter().zip(&obs.spreads).enumerate() {
        ent.row(vec![i.to_string(), system.spins[i].label().into(), num(*s), num(*sp)]);
    }
    let mut files = vec![trace.write(dir, "run_energy.csv", &hash)?, ent.write(dir, "run_entropy.csv", &hash)?];
    for b in &obs.identical {
        files.push(rdm_table(&b.rdm).write(dir, &format!("rdm_{}.csv", b.spin.label()), &hash)?);
    }
    let lines = vec![format!("E = {:.6} ± {:.6} after {} steps", e.mean, e.std_error, state.step_index())];
    finish(setup.manifest, dir, files, lines)
}
