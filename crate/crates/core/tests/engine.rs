use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use tdqmc_core::engine::{advance_walkers_step, prepare_from_orbitals, DriftPolicy, EngineOptions, TdqmcState};
use tdqmc_core::hartree_fock::hf_solve;
use tdqmc_core::model::{harmonic_orbital, Nonlocality, NonlocalityParams, SystemConfig};

fn small(mut c: SystemConfig, m: usize, steps: usize) -> SystemConfig {
    c.n_walkers = m;
    c.n_steps = steps;
    c
}

fn options(seed: u64, average: usize) -> EngineOptions {
    EngineOptions { seed, average_steps: average, energy_blocks: 20, ..EngineOptions::default() }
}

fn pair_sigma(n: usize, sigma: f64) -> NonlocalityParams {
    let mut p = NonlocalityParams::mean_field(n);
    for j in 0..n {
        for i in 0..n {
            if i != j {
                p.set(j, i, Nonlocality::Sigma(sigma));
            }
        }
    }
    p
}

fn relax(config: &SystemConfig, params: NonlocalityParams, opts: EngineOptions) -> TdqmcState {
    let hf = hf_solve(config).unwrap();
    prepare_from_orbitals(config, params, opts, &hf.orbitals).unwrap()
}

#[test]
fn frozen_harmonic_guide_samples_its_density() {
    let config = small(SystemConfig::spin_polarized(1), 2000, 10_000);
    let phi = harmonic_orbital(config.grid, 0, 1.0);
    // The plain update r + v dτ + η √dτ; the smooth cap adds its own O(dτ)
    // widening on top of the Euler bias.
    let opts = EngineOptions { drift: DriftPolicy::Raw, ..options(7, 50) };
    let mut state = TdqmcState::new(&config, NonlocalityParams::mean_field(1), opts, std::slice::from_ref(&phi)).unwrap();
    let burn_in = 500;
    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0usize);
    for step in 0..config.n_steps {
        state.ensemble = advance_walkers_step(&state, &config);
        if step >= burn_in {
            for &x in state.ensemble.electron(0) {
                sum += x;
                sum_sq += x * x;
            }
            count += config.n_walkers;
        }
    }
    let mean = sum / count as f64;
    let var = sum_sq / count as f64 - mean * mean;
    assert!((var - 0.5).abs() <= 0.01, "stationary variance {var}");

    // Walkers are independent across the final snapshot.
    let normal = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let edges: Vec<f64> = (0..=24).map(|b| -3.0 + 0.25 * b as f64).collect();
    let mut counts = vec![0usize; edges.len() + 1];
    for &x in state.ensemble.electron(0) {
        counts[edges.partition_point(|e| *e <= x)] += 1;
    }
    let m = config.n_walkers as f64;
    let mut chi2 = 0.0;
    for (b, c) in counts.iter().enumerate() {
        let lo = if b == 0 { 0.0 } else { normal.cdf(edges[b - 1]) };
        let hi = if b == edges.len() { 1.0 } else { normal.cdf(edges[b]) };
        let expected = m * (hi - lo);
        chi2 += (*c as f64 - expected).powi(2) / expected;
    }
    let p = ChiSquared::new((counts.len() - 1) as f64).unwrap().sf(chi2);
    assert!(p > 1e-3, "chi2 {chi2}, p {p}");
}

#[test]
fn single_electron_energy_is_exact() {
    let config = small(SystemConfig::spin_polarized(1), 400, 60);
    let state = relax(&config, NonlocalityParams::uniform(1, Nonlocality::Local), options(3, 20));
    let e = state.energy.unwrap();
    assert!((e.mean - 0.5).abs() < 1e-3, "{e:?}");
}

#[test]
fn fixed_seed_reproduces_bit_for_bit_under_any_thread_count() {
    let config = small(SystemConfig::spin_polarized(2), 150, 30);
    let run = |threads: usize, seed: u64| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| relax(&config, pair_sigma(2, 0.8), options(seed, 10)))
    };
    let a = run(1, 11);
    let b = run(3, 11);
    assert_eq!(a.energy, b.energy);
    assert_eq!(a.ensemble, b.ensemble);
    assert_eq!(a.guides, b.guides);
    assert_eq!(a.energy_trace, b.energy_trace);
    assert_ne!(run(1, 12).ensemble, a.ensemble);
}

#[test]
fn mean_field_replicas_stay_together() {
    let config = small(SystemConfig::spin_compensated(1), 200, 60);
    let state = relax(&config, NonlocalityParams::mean_field(2), options(5, 20));
    for i in 0..2 {
        assert!(state.guides.spread(i) <= 1e-2, "electron {i}: {}", state.guides.spread(i));
    }
}

#[test]
fn same_spin_guides_stay_orthonormal() {
    let config = small(SystemConfig::spin_polarized(3), 120, 40);
    let state = relax(&config, pair_sigma(3, 0.7), options(9, 10));
    let err = state.guides.orthonormality_error(&config.spins);
    assert!(err <= 1e-8, "{err}");
    assert!(state.energy.unwrap().exchange_correction != 0.0);
}

#[test]
fn opposite_spins_carry_no_exchange() {
    let config = small(SystemConfig::spin_compensated(1), 150, 30);
    let state = relax(&config, pair_sigma(2, 0.7), options(4, 10));
    assert_eq!(state.energy.unwrap().exchange_correction, 0.0);
}

#[test]
fn energy_is_stationary_after_relaxation() {
    let base = small(SystemConfig::spin_compensated(1), 600, 200);
    let short = relax(&base, pair_sigma(2, 0.6), options(21, 50)).energy.unwrap();
    let long = relax(&SystemConfig { n_steps: 400, ..base.clone() }, pair_sigma(2, 0.6), options(21, 50)).energy.unwrap();
    let combined = (short.std_error.powi(2) + long.std_error.powi(2)).sqrt();
    assert!((short.mean - long.mean).abs() <= 3.0 * combined, "{short:?} vs {long:?}");
}

#[test]
fn checkpointed_run_matches_uninterrupted() {
    let config = small(SystemConfig::spin_polarized(2), 120, 30);
    let hf = hf_solve(&config).unwrap();
    let mut whole = TdqmcState::new(&config, pair_sigma(2, 0.8), options(2, 10), &hf.orbitals).unwrap();
    whole.run(&config).unwrap();
    let mut parts = TdqmcState::new(&config, pair_sigma(2, 0.8), options(2, 10), &hf.orbitals).unwrap();
    for stop in [7, 19, 30] {
        parts.run_until(&config, stop).unwrap();
        parts = parts.clone();
    }
    assert_eq!(whole.energy, parts.energy);
    assert_eq!(whole.ensemble, parts.ensemble);
}
