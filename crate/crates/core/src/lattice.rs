//! Brillouin-zone bookkeeping shared by every other module.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Nearest-neighbour band `ξ(k) = −2t cos k + μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub hopping: f64,
    pub chem_potential: f64,
}

impl Dispersion {
    pub fn new(hopping: f64, chem_potential: f64) -> Self {
        Dispersion { hopping, chem_potential }
    }

    pub fn at(&self, k: f64) -> f64 {
        -2.0 * self.hopping * k.cos() + self.chem_potential
    }

    /// Band bottom `E = μ − 2t`, the precession frequency of the scar orbit.
    pub fn gap(&self) -> f64 {
        self.chem_potential - 2.0 * self.hopping
    }
}

/// Evenly spaced momenta `k_j = −π + 2πj/L`, `j = 0..L`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    momenta: Vec<f64>,
}

impl MomentumGrid {
    pub fn new(sites: usize) -> Self {
        let momenta = (0..sites).map(|j| -PI + 2.0 * PI * j as f64 / sites as f64).collect();
        MomentumGrid { momenta }
    }

    pub fn len(&self) -> usize {
        self.momenta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn momentum(&self, j: usize) -> f64 {
        self.momenta[j]
    }

    /// Grid index of `k_a + k_b` folded back into the zone.
    ///
    /// Index `j` carries momentum `−π + 2πj/L`, so a sum of two grid momenta
    /// sits at index `a + b − L/2` (an extra `−π`); for odd `L` the sum is
    /// not on the grid and `None` is returned.
    pub fn add(&self, a: usize, b: usize) -> Option<usize> {
        let l = self.len();
        if !l.is_multiple_of(2) {
            return None;
        }
        Some(wrap_index(a as isize + b as isize - (l / 2) as isize, l))
    }

    /// Index of `−k_a`.
    pub fn negate(&self, a: usize) -> usize {
        wrap_index(self.len() as isize - a as isize, self.len())
    }

    /// Index of the zone centre `k = 0` (only on the grid for even `L`).
    pub fn zero_index(&self) -> Option<usize> {
        self.len().is_multiple_of(2).then(|| self.len() / 2)
    }
}

/// Lattice of `L` sites with a gapped dispersion and a retarded broadening η.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    sites: usize,
    dispersion: Dispersion,
    eta: f64,
    grid: MomentumGrid,
    xi: Vec<f64>,
}

impl LatticeModel {
    /// Builds the model, checking `L ≥ 4`, `t > 0`, `η > 0` and `ξ_k > 0` on the grid.
    pub fn new(sites: usize, hopping: f64, chem_potential: f64, eta: f64) -> Result<Self> {
        if sites < 4 {
            return Err(Error::InvalidParameter { name: "L", reason: "need at least 4 sites" });
        }
        if !(hopping > 0.0 && hopping.is_finite()) {
            return Err(Error::InvalidParameter { name: "hopping", reason: "must be positive" });
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter { name: "eta", reason: "must be positive" });
        }
        if !chem_potential.is_finite() {
            return Err(Error::InvalidParameter { name: "mu", reason: "must be finite" });
        }
        let dispersion = Dispersion::new(hopping, chem_potential);
        let grid = MomentumGrid::new(sites);
        let xi: Vec<f64> = grid.momenta().iter().map(|&k| dispersion.at(k)).collect();
        let min_xi = xi.iter().copied().fold(f64::INFINITY, f64::min);
        if min_xi <= 0.0 {
            return Err(Error::NotGapped { min_xi });
        }
        Ok(LatticeModel { sites, dispersion, eta, grid, xi })
    }

    /// Same as [`LatticeModel::new`] with the default broadening `η = 3/L`.
    pub fn with_default_eta(sites: usize, hopping: f64, chem_potential: f64) -> Result<Self> {
        Self::new(sites, hopping, chem_potential, default_eta(sites))
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn hopping(&self) -> f64 {
        self.dispersion.hopping
    }

    pub fn chem_potential(&self) -> f64 {
        self.dispersion.chem_potential
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dispersion_fn(&self) -> Dispersion {
        self.dispersion
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    /// `ξ(k)` at an arbitrary momentum.
    pub fn dispersion(&self, k: f64) -> f64 {
        self.dispersion.at(k)
    }

    /// `ξ_k` at every grid momentum, in grid order.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn xi_at(&self, j: usize) -> f64 {
        self.xi[j]
    }

    pub fn gap(&self) -> f64 {
        self.dispersion.gap()
    }

    pub fn min_xi(&self) -> f64 {
        self.xi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_xi(&self) -> f64 {
        self.xi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn default_eta(sites: usize) -> f64 {
    3.0 / sites as f64
}

/// Lorentzian `δ_η(x) = (1/π) η / (x² + η²)`, i.e. `−Im[1/(x + iη)]/π`.
#[inline]
pub fn delta_broadened(x: f64, eta: f64) -> f64 {
    eta / (PI * (x * x + eta * eta))
}

/// `i mod L` in `[0, L)`.
#[inline]
pub fn wrap_index(i: isize, l: usize) -> usize {
    i.rem_euclid(l as isize) as usize
}
