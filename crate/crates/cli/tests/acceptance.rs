//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when a criterion fails that is not listed in
//! `KNOWN_FAILURES`.

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use tdqmc_cli::commands::{execute, Cli};
use tdqmc_cli::reference::{ReferenceEntry, ReferenceFile, SystemFingerprint};
use tdqmc_core::engine::{advance_walkers_step, prepare_from_orbitals, DriftPolicy, EngineOptions, TdqmcState};
use tdqmc_core::entanglement::{
    linear_entropy_distinguishable, linear_entropy_identical, rdm_identical, DensityMatrix,
};
use tdqmc_core::experiments::{
    observe, spin_compensated_series, spin_polarized_series, SeriesKind, SeriesPlan, SeriesReport,
};
use tdqmc_core::hartree_fock::hf_solve;
use tdqmc_core::model::{harmonic_orbital, Nonlocality, NonlocalityParams, Spin, SystemConfig};
use tdqmc_core::numerics::{gram_schmidt, Complex64, Grid1D, Orbital};
use tdqmc_core::oracle::{
    exact_ground_state, exact_one_body_rdm, symmetry_project, OracleOptions, Symmetry, TensorWavefunction,
};

/// Criteria expected to fail at desk scale; see the README.
const KNOWN_FAILURES: &[u32] = &[7];

/// Walkers for the scans behind criteria 4, 5 and 7.
const POLARIZED_WALKERS: usize = 1000;
const COMPENSATED_WALKERS: usize = 2000;

struct Outcome {
    id: u32,
    pass: bool,
}

fn report(results: &mut Vec<Outcome>, id: u32, pass: bool, detail: String) {
    println!("AC{id:<2} {} {detail}", if pass { "PASS" } else { "FAIL" });
    results.push(Outcome { id, pass });
}

fn reference() -> ReferenceFile {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../reference/oracle.json");
    ReferenceFile::load(&path).expect("reference file")
}

/// Entry for `system` at the default oracle settings; a missing entry means
/// the committed reference is stale.
fn lookup<'a>(file: &'a ReferenceFile, system: &SystemConfig, symmetry: Symmetry) -> &'a ReferenceEntry {
    let fp = SystemFingerprint::new(system, symmetry, &OracleOptions::for_electrons(system.n_electrons()));
    file.get(&fp).unwrap_or_else(|| panic!("no reference entry for {fp:?}; regenerate reference/oracle.json"))
}

fn with_walkers(mut c: SystemConfig, m: usize) -> SystemConfig {
    c.n_walkers = m;
    c
}

fn rdm_ok(rho: &DensityMatrix) -> bool {
    rho.check_properties().passes()
}

fn main() {
    let mut results = Vec::new();
    let refs = reference();
    let mut rdms: Vec<(String, DensityMatrix)> = Vec::new();

    // 1: a single electron in the trap.
    let t = Instant::now();
    let one = with_walkers(SystemConfig::spin_polarized(1), 1000);
    let hf1 = hf_solve(&one).unwrap();
    let state = prepare_from_orbitals(
        &one,
        NonlocalityParams::uniform(1, Nonlocality::Local),
        EngineOptions::default(),
        &hf1.orbitals,
    )
    .unwrap();
    let e1 = state.energy.unwrap();
    let obs1 = observe(&state, &one).unwrap();
    let or1 = exact_ground_state(&one, Symmetry::Antisymmetric, &OracleOptions::for_electrons(1)).unwrap();
    let or1_rho = exact_one_body_rdm(&or1.psi, 0).unwrap();
    let or1_s = linear_entropy_distinguishable(&or1_rho);
    let s_max = obs1.distinguishable[0].abs().max(obs1.identical[0].entropy.raw.abs()).max(or1_s.abs());
    let secs = t.elapsed().as_secs_f64();
    report(
        &mut results,
        1,
        [hf1.energy.total, e1.mean, or1.energy].iter().all(|e| (e - 0.5).abs() <= 1e-3) && s_max <= 1e-6 && secs < 60.0,
        format!(
            "E_hf={:.6} E_tdqmc={:.6} E_oracle={:.6} max|S|={s_max:.1e} in {secs:.1}s",
            hf1.energy.total, e1.mean, or1.energy
        ),
    );
    rdms.push(("tdqmc N=1".into(), obs1.identical[0].rdm.clone()));
    rdms.push(("oracle N=1".into(), or1_rho));

    // 2: noninteracting sums.
    let mut worst: f64 = 0.0;
    let mut cells = Vec::new();
    for n in 1..=4 {
        let mut c = SystemConfig::spin_polarized(n);
        c.coupling = 0.0;
        c.n_walkers = 300;
        c.n_steps = 100;
        let want = (n * n) as f64 / 2.0;
        let hf = hf_solve(&c).unwrap();
        let opts = EngineOptions { average_steps: 40, ..EngineOptions::default() };
        let tq = prepare_from_orbitals(&c, NonlocalityParams::mean_field(n), opts, &hf.orbitals).unwrap();
        let mut got = vec![hf.energy.total, tq.energy.unwrap().mean];
        if n <= 2 {
            got.push(exact_ground_state(&c, Symmetry::Antisymmetric, &OracleOptions::for_electrons(n)).unwrap().energy);
        }
        worst = got.iter().map(|e| (e - want).abs()).fold(worst, f64::max);
        cells.push(format!("N={n}:{}", got.iter().map(|e| format!("{e:.5}")).collect::<Vec<_>>().join("/")));
    }
    report(&mut results, 2, worst <= 2e-3, format!("{} (hf/tdqmc/oracle) max dev {worst:.1e}", cells.join(" ")));

    // 3: mean-field limit.
    let t = Instant::now();
    let pair = with_walkers(SystemConfig::spin_compensated(1), 5000);
    let hf2 = hf_solve(&pair).unwrap();
    let mf = prepare_from_orbitals(&pair, NonlocalityParams::mean_field(2), EngineOptions::default(), &hf2.orbitals)
        .unwrap();
    let e = mf.energy.unwrap();
    let secs = t.elapsed().as_secs_f64();
    let obs = observe(&mf, &pair).unwrap();
    rdms.extend(obs.identical.iter().map(|b| (format!("mean-field {}", b.spin.label()), b.rdm.clone())));
    report(
        &mut results,
        3,
        (e.mean - hf2.energy.total).abs() <= 3.0 * e.std_error && e.std_error <= 2e-3 && secs < 600.0,
        format!("E={:.6}±{:.6} E_hf={:.6} in {secs:.0}s", e.mean, e.std_error, hf2.energy.total),
    );

    // 4 and 7: spin-compensated series, shells 1 and 2.
    let t = Instant::now();
    let mut plan = SeriesPlan::new(SeriesKind::Compensated);
    plan.oracle_max_electrons = 0;
    plan.check_frozen_shells = false;
    let comp = spin_compensated_series(&with_walkers(SystemConfig::spin_polarized(1), COMPENSATED_WALKERS), 2, &plan)
        .unwrap();
    let comp_secs = t.elapsed().as_secs_f64();
    collect_rdms(&comp, &mut rdms);
    let singlet = lookup(&refs, &SystemConfig::spin_compensated(1), Symmetry::Symmetric);
    let r1 = &comp.rows[0];
    let e_o = singlet.energy;
    let refine = singlet.refinement.as_ref().map_or(f64::INFINITY, |r| r.change);
    let rel = (r1.energy - e_o).abs() / e_o.abs();
    report(
        &mut results,
        4,
        e_o <= r1.energy && r1.energy < r1.hf_energy && rel <= 5e-3 && refine < 1e-3 && comp_secs < 3600.0,
        format!(
            "E*={:.6}±{:.6} at sigma*={:.3} E_oracle={e_o:.6} (refinement change {refine:.1e}) E_hf={:.6} rel err {rel:.1e}, series {comp_secs:.0}s",
            r1.energy, r1.std_error, r1.sigma_star, r1.hf_energy
        ),
    );

    // 5: spin-polarized entropies.
    let mut plan = SeriesPlan::new(SeriesKind::Polarized);
    plan.oracle_max_electrons = 0;
    let pol = spin_polarized_series(&with_walkers(SystemConfig::spin_polarized(1), POLARIZED_WALKERS), 3, &plan).unwrap();
    collect_rdms(&pol, &mut rdms);
    let mut ok5 = true;
    let mut cells = Vec::new();
    for row in pol.rows.iter().filter(|r| r.n_electrons >= 2) {
        let o = lookup(&refs, &SystemConfig::spin_polarized(row.n_electrons), Symmetry::Antisymmetric);
        let s_o = o.entropy_identical["up"];
        let s = row.entropy_identical.raw;
        let tol = (0.2 * s_o).max(0.005);
        ok5 &= (s - s_o).abs() <= tol;
        cells.push(format!("N={}: S={s:.5} S_oracle={s_o:.5} tol {tol:.4}", row.n_electrons));
    }
    let s2 = pol.rows[1].entropy_identical.raw;
    let spread = pol.entropy_spread();
    ok5 &= spread <= 2.0 * s2;
    let s2_oracle = lookup(&refs, &SystemConfig::spin_polarized(2), Symmetry::Antisymmetric).entropy_identical["up"];
    report(
        &mut results,
        5,
        ok5,
        format!(
            "{}; spread {spread:.5} vs 2*S(N=2)={:.5} (2*S_oracle(N=2)={:.5})",
            cells.join(", "),
            2.0 * s2,
            2.0 * s2_oracle
        ),
    );

    // 6: Hartree-Fock determinants carry no identical-particle entropy.
    let mut worst: f64 = 0.0;
    for c in [
        SystemConfig::spin_polarized(2),
        SystemConfig::spin_polarized(3),
        SystemConfig::spin_polarized(4),
        SystemConfig::spin_compensated(2),
    ] {
        let hf = hf_solve(&c).unwrap();
        let set: Vec<&Orbital> = hf.orbitals.iter().collect();
        for (spin, members) in c.spin_blocks() {
            let (rho, _) = rdm_identical(spin, std::slice::from_ref(&set), &c.spins).unwrap();
            worst = worst.max(linear_entropy_identical(&rho, members.len()).raw.abs());
            rdms.push((format!("hf {:?}", c.spins), rho));
        }
    }
    report(&mut results, 6, worst <= 1e-8, format!("max |S_id| of HF determinants {worst:.1e}"));

    // 7: entropy falls from one to two shells.
    let comp4 = lookup(&refs, &SystemConfig::spin_compensated(2), Symmetry::Antisymmetric);
    let (o1, o2) = (singlet.entropy_identical["up"], comp4.entropy_identical["up"]);
    let (t1, t2) = (comp.rows[0].entropy_identical.raw, comp.rows[1].entropy_identical.raw);
    report(
        &mut results,
        7,
        t2 < t1 && o2 < o1,
        format!(
            "tdqmc S(1)={t1:.5} S(2)={t2:.5} [sigma*={:.3}]; oracle S(1)={o1:.5} S(2)={o2:.5}",
            comp.rows[1].sigma_star
        ),
    );

    // 8: walker law under a frozen harmonic guide.
    let (var, p) = frozen_guide_walkers(5000, 10_000);
    report(&mut results, 8, (var - 0.5).abs() <= 0.01 && p > 1e-3, format!("variance {var:.4}, chi2 p {p:.3}"));

    // 9: density-matrix properties and the closed-form Slater RDM.
    let bad: Vec<&str> = rdms.iter().filter(|(_, r)| !rdm_ok(r)).map(|(n, _)| n.as_str()).collect();
    let diff = slater_closed_form_vs_integral();
    report(
        &mut results,
        9,
        bad.is_empty() && diff <= 1e-8,
        format!("{} matrices checked, failing: {bad:?}; closed form vs integral {diff:.1e}", rdms.len()),
    );

    // 10: thread count never changes outputs.
    let (same, files) = thread_invariance();
    report(&mut results, 10, same, format!("{files} result CSVs compared across --threads 1 and 3"));

    let unexpected: Vec<u32> = results.iter().filter(|o| !o.pass && !KNOWN_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    let passed = results.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria pass; known failures {KNOWN_FAILURES:?}", results.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

fn collect_rdms(report: &SeriesReport, out: &mut Vec<(String, DensityMatrix)>) {
    for row in &report.rows {
        out.push((format!("{} N={}", report.kind.label(), row.n_electrons), row.rdm.clone()));
        if let Some(scan) = &row.scan {
            for p in &scan.points {
                for b in &p.observables.identical {
                    out.push((format!("scan N={} v={:.3} {}", row.n_electrons, p.value, b.spin.label()), b.rdm.clone()));
                }
            }
        }
    }
}

/// Stationary variance over all walkers after burn-in and χ² p-value of
/// the final snapshot against |φ0|².
fn frozen_guide_walkers(m: usize, steps: usize) -> (f64, f64) {
    let mut config = SystemConfig::spin_polarized(1);
    config.n_walkers = m;
    let phi = harmonic_orbital(config.grid, 0, 1.0);
    let opts = EngineOptions { drift: DriftPolicy::Raw, seed: 2024, ..EngineOptions::default() };
    let mut state = TdqmcState::new(&config, NonlocalityParams::mean_field(1), opts, std::slice::from_ref(&phi)).unwrap();
    let (mut s1, mut s2, mut count) = (0.0, 0.0, 0usize);
    for step in 0..steps {
        state.ensemble = advance_walkers_step(&state, &config);
        if step >= steps / 20 {
            for &x in state.ensemble.electron(0) {
                s1 += x;
                s2 += x * x;
            }
            count += m;
        }
    }
    let mean = s1 / count as f64;
    let var = s2 / count as f64 - mean * mean;
    let normal = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let edges: Vec<f64> = (0..=30).map(|b| -3.0 + 0.2 * b as f64).collect();
    let mut counts = vec![0usize; edges.len() + 1];
    for &x in state.ensemble.electron(0) {
        counts[edges.partition_point(|e| *e <= x)] += 1;
    }
    let mut chi2 = 0.0;
    for (b, c) in counts.iter().enumerate() {
        let lo = if b == 0 { 0.0 } else { normal.cdf(edges[b - 1]) };
        let hi = if b == edges.len() { 1.0 } else { normal.cdf(edges[b]) };
        let expected = m as f64 * (hi - lo);
        chi2 += (*c as f64 - expected).powi(2) / expected;
    }
    (var, ChiSquared::new((counts.len() - 1) as f64).unwrap().sf(chi2))
}

/// Largest entry difference between the closed-form two-electron Slater RDM
/// (averaged over rotated replicas) and the explicit contraction of the
/// antisymmetrized tensor-grid state, on a 64-point grid.
fn slater_closed_form_vs_integral() -> f64 {
    let g = Grid1D::symmetric(7.0, 64).unwrap();
    let spins = vec![Spin::Up, Spin::Up];
    let mut sets = Vec::new();
    let mut explicit = vec![Complex64::new(0.0, 0.0); 64 * 64];
    let replicas = 3;
    for r in 0..replicas {
        let shift = 0.3 * r as f64;
        let raw = [
            Orbital::from_fn(g, |x| Complex64::new((-0.5 * (x - shift).powi(2)).exp(), 0.1 * x * (-0.3 * x * x).exp())),
            Orbital::from_fn(g, |x| Complex64::new(x * (-0.6 * x * x).exp(), 0.2 * (-(x + shift).powi(2)).exp())),
        ];
        let orbs = gram_schmidt(&raw).unwrap();
        let factors: Vec<&[Complex64]> = orbs.iter().map(|o| o.values()).collect();
        let psi = TensorWavefunction::product(g, spins.clone(), Symmetry::Antisymmetric, &factors).unwrap();
        let psi = symmetry_project(&psi, Symmetry::Antisymmetric).unwrap();
        let rho = exact_one_body_rdm(&psi, 0).unwrap();
        for (e, v) in explicit.iter_mut().zip(rho.entries()) {
            *e += v / replicas as f64;
        }
        sets.push(orbs);
    }
    let views: Vec<Vec<&Orbital>> = sets.iter().map(|s| s.iter().collect()).collect();
    let (closed, _) = rdm_identical(Spin::Up, &views, &spins).unwrap();
    closed.entries().iter().zip(&explicit).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Runs `scan` and `run` with one and three worker threads and compares
/// every CSV byte for byte.
fn thread_invariance() -> (bool, usize) {
    let tmp = std::env::temp_dir().join(format!("tdqmc-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&tmp).unwrap();
    let cfg = tmp.join("pair.toml");
    std::fs::write(
        &cfg,
        "[system]\nkind = \"polarized\"\nelectrons = 2\n\n[engine]\nwalkers = 200\nsteps = 40\naverage_steps = 10\nenergy_blocks = 10\n\n[[nonlocality.pairs]]\nfrom = 0\nto = 1\nalpha = 0.8\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap().to_string();
    let mut same = true;
    let mut files = 0;
    for args in [vec!["scan", cfg.as_str(), "--pairs", "ground", "--alpha", "0.25:2.0:5"], vec!["run", cfg.as_str()]] {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let out = tmp.join(format!("{}-{threads}", args[0]));
            let mut argv = vec!["tdqmc", "--seed", "5", "--threads", threads, "--out-dir", out.to_str().unwrap()];
            argv.extend(&args);
            let report = execute(&Cli::try_parse_from(argv).unwrap()).unwrap();
            let mut csvs: Vec<(String, Vec<u8>)> = report
                .files
                .iter()
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
                .collect();
            csvs.sort();
            outputs.push(csvs);
        }
        files += outputs[0].len();
        same &= !outputs[0].is_empty() && outputs[0] == outputs[1];
    }
    let _ = std::fs::remove_dir_all(&tmp);
    (same, files)
}
