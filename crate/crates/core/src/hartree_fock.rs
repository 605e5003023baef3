//! Self-consistent Hartree-Fock ground state by imaginary-time relaxation.
//!
//! Each orbital i evolves under T + v_en + V^H_i with the exchange term
//! applied as an orbital-valued action (never divided by φ_i), followed by
//! Gram-Schmidt inside each spin block. The propagator is shifted by the
//! orbital's current Rayleigh quotient so converged orbitals are exact fixed
//! points of the discrete Hartree-Fock equations.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::interaction::Interaction;
use crate::model::{harmonic_orbital, Spin, SystemConfig};
use crate::numerics::{
    gram_schmidt, shifted_crank_nicolson_step, CrankNicolsonScratch, Orbital,
};
use crate::numerics::orthonormal::orthonormalize_in_place;
use crate::{Error, Result};

/// Energy decomposition of a Slater determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfEnergyReport {
    pub kinetic: f64,
    pub external: f64,
    pub hartree: f64,
    pub exchange: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct HfState {
    pub orbitals: Vec<Orbital>,
    pub energy: HfEnergyReport,
    pub steps: usize,
    pub energy_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfOptions {
    pub dtau: f64,
    pub max_steps: usize,
    /// Converged when |ΔE| ≤ tolerance·|E| between consecutive steps.
    pub tolerance: f64,
}

impl Default for HfOptions {
    fn default() -> Self {
        Self { dtau: 0.05, max_steps: 20_000, tolerance: 1e-9 }
    }
}

/// Σ_{j≠i} ∫ v_ee(x, x') |φ_j(x')|² dx'.
pub fn hartree_potential(i: usize, orbitals: &[Orbital], config: &SystemConfig) -> Vec<f64> {
    let inter = Interaction::new(config);
    let n = config.grid.len();
    let mut total = alloc::vec![0.0; n];
    let mut buf = alloc::vec![0.0; n];
    for (j, phi) in orbitals.iter().enumerate() {
        if j == i {
            continue;
        }
        inter.apply_real(&phi.density(), &mut buf);
        total.iter_mut().zip(&buf).for_each(|(t, b)| *t += b);
    }
    total
}

/// Exchange action on φ_i:
/// −Σ_{j≠i, s_j = s_i} [∫ v_ee(x, x') φ_i(x') φ_j*(x') dx'] φ_j(x).
pub fn exchange_apply(i: usize, orbitals: &[Orbital], config: &SystemConfig) -> Orbital {
    let inter = Interaction::new(config);
    let views: Vec<&[Complex64]> = orbitals.iter().map(|o| o.values()).collect();
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); config.grid.len()];
    let mut ws = ExchangeWorkspace::new(config.grid.len());
    exchange_action(i, &views, &config.spins, &inter, &mut ws, &mut out);
    Orbital::new(config.grid, out)
}

pub(crate) struct ExchangeWorkspace {
    split: (Vec<f64>, Vec<f64>),
    conv: Vec<Complex64>,
}

impl ExchangeWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            split: (Vec::with_capacity(n), Vec::with_capacity(n)),
            conv: alloc::vec![Complex64::new(0.0, 0.0); n],
        }
    }
}

/// Writes the exchange action on orbital `i` into `out` (overwritten).
pub(crate) fn exchange_action(
    i: usize,
    orbitals: &[&[Complex64]],
    spins: &[Spin],
    inter: &Interaction,
    ws: &mut ExchangeWorkspace,
    out: &mut [Complex64],
) {
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    for (j, phi_j) in orbitals.iter().enumerate() {
        if j == i || spins[j] != spins[i] {
            continue;
        }
        inter.convolve_product_support(orbitals[i], phi_j, &mut ws.conv);
        for ((o, c), p) in out.iter_mut().zip(&ws.conv).zip(phi_j.iter()) {
            *o -= c * p;
        }
    }
}

/// Kinetic, external, Hartree and exchange energies of a set of orbitals.
pub fn hf_energy(orbitals: &[Orbital], config: &SystemConfig) -> HfEnergyReport {
    hf_energy_with(orbitals, config, &Interaction::new(config))
}

pub(crate) fn hf_energy_with(
    orbitals: &[Orbital],
    config: &SystemConfig,
    inter: &Interaction,
) -> HfEnergyReport {
    let g = config.grid;
    let n = g.len();
    let v_ext = config.external_potential();
    let mut kinetic = 0.0;
    let mut external = 0.0;
    for phi in orbitals {
        let lap = config.stencil.laplacian(phi.values(), g.dx());
        let t: Vec<f64> = phi.values().iter().zip(&lap).map(|(p, l)| (p.conj() * l).re).collect();
        kinetic += -0.5 * g.trapezoid(&t);
        let d: Vec<f64> = phi.density().iter().zip(&v_ext).map(|(d, v)| d * v).collect();
        external += g.trapezoid(&d);
    }

    let densities: Vec<Vec<f64>> = orbitals.iter().map(|o| o.density()).collect();
    let mut pot = alloc::vec![0.0; n];
    let mut hartree = 0.0;
    for (i, di) in densities.iter().enumerate() {
        inter.apply_real(di, &mut pot);
        for (j, dj) in densities.iter().enumerate() {
            if j != i {
                let p: Vec<f64> = pot.iter().zip(dj).map(|(a, b)| a * b).collect();
                hartree += 0.5 * g.trapezoid(&p);
            }
        }
    }

    let mut exchange = 0.0;
    let mut ws = ExchangeWorkspace::new(n);
    for i in 0..orbitals.len() {
        for j in 0..orbitals.len() {
            if i == j || config.spins[i] != config.spins[j] {
                continue;
            }
            // X_ij(x) = ∫ v(x,x') φ_i(x') φ_j*(x') dx', then ∫ φ_j(x) φ_i*(x) X_ij(x) dx
            inter.convolve_product(orbitals[i].values(), orbitals[j].values(), &mut ws.split, &mut ws.conv);
            let integrand: Vec<f64> = (0..n)
                .map(|a| (orbitals[j].values()[a] * orbitals[i].values()[a].conj() * ws.conv[a]).re)
                .collect();
            exchange -= 0.5 * g.trapezoid(&integrand);
        }
    }
    HfEnergyReport {
        kinetic,
        external,
        hartree,
        exchange,
        total: kinetic + external + hartree + exchange,
    }
}

/// Lowest harmonic levels per spin block, the starting point of the SCF.
pub fn initial_orbitals(config: &SystemConfig) -> Vec<Orbital> {
    config
        .levels()
        .into_iter()
        .map(|n| harmonic_orbital(config.grid, n, config.omega))
        .collect()
}

/// Orthonormalizes each spin block of `orbitals` in place (ordering kept).
pub fn orthonormalize_spin_blocks(orbitals: &mut [Orbital], spins: &[Spin]) -> Result<()> {
    for spin in [Spin::Up, Spin::Down] {
        let idx: Vec<usize> = (0..orbitals.len()).filter(|&i| spins[i] == spin).collect();
        if idx.is_empty() {
            continue;
        }
        let block: Vec<Orbital> = idx.iter().map(|&i| orbitals[i].clone()).collect();
        for (k, o) in gram_schmidt(&block)?.into_iter().enumerate() {
            orbitals[idx[k]] = o;
        }
    }
    Ok(())
}

const CONVERGED_STEPS: usize = 3;

pub fn hf_solve(config: &SystemConfig) -> Result<HfState> {
    hf_solve_with(config, &HfOptions::default())
}

pub fn hf_solve_with(config: &SystemConfig, opts: &HfOptions) -> Result<HfState> {
    config.validate()?;
    let inter = Interaction::new(config);
    let mut orbitals = initial_orbitals(config);
    orthonormalize_spin_blocks(&mut orbitals, &config.spins)?;
    let mut last = hf_energy_with(&orbitals, config, &inter).total;
    let mut trace = alloc::vec![last];
    let mut quiet = 0;
    for step in 1..=opts.max_steps {
        scf_step(&mut orbitals, config, &inter, opts.dtau)?;
        let report = hf_energy_with(&orbitals, config, &inter);
        if !report.total.is_finite() {
            return Err(Error::NonFinite("Hartree-Fock energy"));
        }
        trace.push(report.total);
        // Require a few quiet steps in a row so a turning point in the
        // trace is not mistaken for convergence.
        if (report.total - last).abs() <= opts.tolerance * report.total.abs().max(1e-300) {
            quiet += 1;
            if quiet >= CONVERGED_STEPS {
                return Ok(HfState { orbitals, energy: report, steps: step, energy_trace: trace });
            }
        } else {
            quiet = 0;
        }
        last = report.total;
    }
    Err(Error::NoConvergence { steps: opts.max_steps, energy_trace: trace })
}

/// One shifted Crank-Nicolson SCF sweep over all orbitals (Jacobi order:
/// every orbital sees the previous step's partners).
fn scf_step(
    orbitals: &mut [Orbital],
    config: &SystemConfig,
    inter: &Interaction,
    dtau: f64,
) -> Result<()> {
    let g = config.grid;
    let n = g.len();
    let v_ext = config.external_potential();
    let hartree_parts: Vec<Vec<f64>> = orbitals
        .iter()
        .map(|o| {
            let mut h = alloc::vec![0.0; n];
            inter.apply_real(&o.density(), &mut h);
            h
        })
        .collect();
    let views: Vec<Vec<Complex64>> = orbitals.iter().map(|o| o.values().to_vec()).collect();
    let view_refs: Vec<&[Complex64]> = views.iter().map(|v| v.as_slice()).collect();
    let mut ws = ExchangeWorkspace::new(n);
    let mut x = alloc::vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = CrankNicolsonScratch::default();
    for i in 0..orbitals.len() {
        let mut v_loc = v_ext.clone();
        for (j, h) in hartree_parts.iter().enumerate() {
            if j != i {
                v_loc.iter_mut().zip(h).for_each(|(v, h)| *v += h);
            }
        }
        exchange_action(i, &view_refs, &config.spins, inter, &mut ws, &mut x);
        let values = orbitals[i].values_mut();
        shifted_crank_nicolson_step(values, &v_loc, Some(&x), &g, dtau, config.stencil, &mut scratch);
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("Hartree-Fock orbital"));
        }
    }
    for spin in [Spin::Up, Spin::Down] {
        let mut block: Vec<&mut [Complex64]> = orbitals
            .iter_mut()
            .zip(&config.spins)
            .filter(|(_, s)| **s == spin)
            .map(|(o, _)| o.values_mut())
            .collect();
        orthonormalize_in_place(&g, &mut block)?;
    }
    Ok(())
}
