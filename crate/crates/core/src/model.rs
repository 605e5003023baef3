//! The physical system: harmonic confinement, soft-core Coulomb repulsion,
//! static spin labels and the nonlocality parameters σ_{j,i} = α_{j,i}·s_j.

use alloc::format;
use alloc::vec::Vec;

use crate::numerics::{Grid1D, Orbital, Stencil};
use crate::{math, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn label(self) -> &'static str {
        match self {
            Spin::Up => "up",
            Spin::Down => "down",
        }
    }
}

/// Confinement potential ω²x²/2.
#[inline]
pub fn v_en(x: f64, omega: f64) -> f64 {
    0.5 * omega * omega * x * x
}

/// Soft-core repulsion 1/√(r² + a²) (e = 1).
#[inline]
pub fn v_ee(xi: f64, xj: f64, a: f64) -> f64 {
    let r = xi - xj;
    1.0 / math::sqrt(r * r + a * a)
}

/// σ = α·s. Infinite α stays infinite (mean field), even for s = 0.
#[inline]
pub fn sigma_from_alpha(alpha: f64, s: f64) -> f64 {
    if alpha.is_infinite() {
        f64::INFINITY
    } else {
        alpha * s
    }
}

/// Harmonic-oscillator eigenfunction n of frequency ω sampled on `grid`,
/// with a positive leading lobe at +∞.
pub fn harmonic_orbital(grid: Grid1D, n: usize, omega: f64) -> Orbital {
    let pref = math::sqrt(math::sqrt(omega / math::PI));
    let sw = math::sqrt(omega);
    Orbital::from_real_fn(grid, |x| {
        let xi = sw * x;
        let g = pref * math::exp(-0.5 * xi * xi);
        let mut prev = 0.0;
        let mut cur = g;
        for k in 0..n {
            let next = math::sqrt(2.0 / (k + 1) as f64) * xi * cur
                - math::sqrt(k as f64 / (k + 1) as f64) * prev;
            prev = cur;
            cur = next;
        }
        cur
    })
}

/// Width of the Gaussian window between a walker and its partner electron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelWidth {
    /// σ → ∞: every partner walker counts equally (Hartree / mean field).
    MeanField,
    /// σ → 0: each walker only sees the partner walker with the same index.
    Local,
    Finite(f64),
}

/// How one ordered pair (j → i) is windowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlocality {
    MeanField,
    Local,
    /// σ = α·s_j, recomputed from the live ensemble.
    Alpha(f64),
    /// σ given directly.
    Sigma(f64),
}

impl Nonlocality {
    /// From a raw α, mapping +∞ to mean field and 0 to local.
    pub fn from_alpha(alpha: f64) -> Self {
        if alpha.is_infinite() {
            Nonlocality::MeanField
        } else if alpha == 0.0 {
            Nonlocality::Local
        } else {
            Nonlocality::Alpha(alpha)
        }
    }

    pub fn from_sigma(sigma: f64) -> Self {
        if sigma.is_infinite() {
            Nonlocality::MeanField
        } else if sigma == 0.0 {
            Nonlocality::Local
        } else {
            Nonlocality::Sigma(sigma)
        }
    }

    /// Kernel width given the partner ensemble spread `s_j`.
    pub fn width(self, s_j: f64) -> KernelWidth {
        let sigma = match self {
            Nonlocality::MeanField => return KernelWidth::MeanField,
            Nonlocality::Local => return KernelWidth::Local,
            Nonlocality::Alpha(a) => sigma_from_alpha(a, s_j),
            Nonlocality::Sigma(s) => s,
        };
        if sigma.is_infinite() {
            KernelWidth::MeanField
        } else if sigma <= 0.0 {
            KernelWidth::Local
        } else {
            KernelWidth::Finite(sigma)
        }
    }

    /// α-equivalent value (NaN for a direct σ).
    pub fn alpha(self) -> f64 {
        match self {
            Nonlocality::MeanField => f64::INFINITY,
            Nonlocality::Local => 0.0,
            Nonlocality::Alpha(a) => a,
            Nonlocality::Sigma(_) => f64::NAN,
        }
    }
}

/// Dense N×N table of pair nonlocalities, entry (j, i) windowing electron
/// j's walkers as seen by electron i. Diagonal entries are never used.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalityParams {
    n: usize,
    entries: Vec<Nonlocality>,
}

impl NonlocalityParams {
    pub fn uniform(n: usize, value: Nonlocality) -> Self {
        Self { n, entries: alloc::vec![value; n * n] }
    }

    pub fn mean_field(n: usize) -> Self {
        Self::uniform(n, Nonlocality::MeanField)
    }

    /// Row-major α matrix; entries must be ≥ 0 (+∞ allowed).
    pub fn from_alpha_matrix(n: usize, alpha: &[f64]) -> Result<Self> {
        if alpha.len() != n * n {
            return Err(Error::InvalidConfig {
                field: "alpha",
                reason: format!("expected {} entries, got {}", n * n, alpha.len()),
            });
        }
        if let Some(a) = alpha.iter().find(|a| a.is_nan() || **a < 0.0) {
            return Err(Error::InvalidConfig {
                field: "alpha",
                reason: format!("entries must be non-negative, got {a}"),
            });
        }
        Ok(Self { n, entries: alpha.iter().map(|&a| Nonlocality::from_alpha(a)).collect() })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> Nonlocality {
        self.entries[j * self.n + i]
    }

    pub fn set(&mut self, j: usize, i: usize, value: Nonlocality) {
        self.entries[j * self.n + i] = value;
    }

    pub fn with(mut self, j: usize, i: usize, value: Nonlocality) -> Self {
        self.set(j, i, value);
        self
    }
}

/// Physical system and propagation controls shared by every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub spins: Vec<Spin>,
    pub omega: f64,
    pub softening_a: f64,
    /// Interaction strength e² (1 in atomic units; 0 switches repulsion off).
    pub coupling: f64,
    pub n_walkers: usize,
    pub grid: Grid1D,
    pub dtau: f64,
    pub n_steps: usize,
    pub stencil: Stencil,
}

impl SystemConfig {
    pub const MIN_WALKERS: usize = 100;

    pub fn new(spins: Vec<Spin>) -> Self {
        Self {
            spins,
            omega: 1.0,
            softening_a: 1.0,
            coupling: 1.0,
            n_walkers: 5000,
            grid: Grid1D::default(),
            dtau: 0.02,
            n_steps: 200,
            stencil: Stencil::FivePoint,
        }
    }

    /// One same-spin electron per level.
    pub fn spin_polarized(n_electrons: usize) -> Self {
        Self::new(alloc::vec![Spin::Up; n_electrons])
    }

    /// Two opposite-spin electrons per level, ordered (up, down) level by level.
    pub fn spin_compensated(shells: usize) -> Self {
        Self::new((0..2 * shells).map(|k| if k % 2 == 0 { Spin::Up } else { Spin::Down }).collect())
    }

    pub fn n_electrons(&self) -> usize {
        self.spins.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: alloc::string::String| Err(Error::InvalidConfig { field, reason });
        if self.spins.is_empty() {
            return bad("spins", "need at least one electron".into());
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad("omega", format!("must be positive, got {}", self.omega));
        }
        if !(self.softening_a > 0.0 && self.softening_a.is_finite()) {
            return bad("softening_a", format!("must be positive, got {}", self.softening_a));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return bad("coupling", format!("must be non-negative, got {}", self.coupling));
        }
        if self.n_walkers < Self::MIN_WALKERS {
            return bad(
                "n_walkers",
                format!("need at least {} walkers, got {}", Self::MIN_WALKERS, self.n_walkers),
            );
        }
        if !(self.dtau > 0.0 && self.dtau.is_finite()) {
            return bad("dtau", format!("must be positive, got {}", self.dtau));
        }
        Ok(())
    }

    #[inline]
    pub fn v_en(&self, x: f64) -> f64 {
        v_en(x, self.omega)
    }

    /// Interaction including the coupling constant.
    #[inline]
    pub fn v_ee(&self, xi: f64, xj: f64) -> f64 {
        if self.coupling == 0.0 {
            0.0
        } else {
            self.coupling * v_ee(xi, xj, self.softening_a)
        }
    }

    pub fn external_potential(&self) -> Vec<f64> {
        self.grid.points().map(|x| self.v_en(x)).collect()
    }

    /// G×G row-major table of v_ee(x_a, x_b) on the grid.
    pub fn interaction_matrix(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.len();
        let mut m = alloc::vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                m[a * n + b] = self.v_ee(g.x(a), g.x(b));
            }
        }
        m
    }

    /// Harmonic level occupied by each electron: the k-th electron of a spin
    /// species sits in level k.
    pub fn levels(&self) -> Vec<usize> {
        let mut up = 0;
        let mut down = 0;
        self.spins
            .iter()
            .map(|s| {
                let c = if *s == Spin::Up { &mut up } else { &mut down };
                *c += 1;
                *c - 1
            })
            .collect()
    }

    /// Indices of electrons sharing a spin, for each spin present.
    pub fn spin_blocks(&self) -> Vec<(Spin, Vec<usize>)> {
        [Spin::Up, Spin::Down]
            .into_iter()
            .filter_map(|s| {
                let idx: Vec<usize> =
                    (0..self.spins.len()).filter(|&i| self.spins[i] == s).collect();
                (!idx.is_empty()).then_some((s, idx))
            })
            .collect()
    }
}
