//! Brute-force reference: exact evolution on a truncated two-mode Fock space.
//!
//! Each oscillator is cut at `nmax` quanta and the joint basis is ordered
//! lexicographically in (n₁, n₂), so index = n₁·(nmax+1) + n₂. The dense
//! route ([`evolve`], [`partial_trace`], [`refresh`]) works on full density
//! matrices. [`SectorPropagator`] evolves the same truncated dynamics one
//! fixed-N block at a time, which is what makes hot oscillators affordable.

mod density;
mod operators;
mod oracle;
mod sector;

pub use density::{
    fit_theta, fit_theta_with_floor, partial_trace, refresh, tensor_product, thermal_density,
    Basis, BasisLabel, DensityMatrix, FitMethod, FitWarning, Oscillator, ThetaFit,
    FIT_RESIDUAL_WARN,
};
pub use operators::{build_operators, evolve, evolve_with, OperatorSet, Propagator};
pub use oracle::{oracle_step, Backend, Oracle, OracleStep};
pub use sector::{JointPopulations, SectorPropagator};

use crate::error::{Error, Result};
use crate::params::{SystemParams, ThermalState};

/// Per-oscillator cutoff and the tail mass it is allowed to drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub nmax: usize,
    /// Largest Boltzmann tail mass allowed beyond `nmax`.
    pub tail_bound: f64,
    /// Population floor for the ratio fit of refreshed marginals.
    pub fit_floor: f64,
}

impl TruncationPolicy {
    pub const DEFAULT_TAIL_BOUND: f64 = 1e-12;
    /// Populations this close to the cutoff are distorted by the box walls at
    /// relative order tail_bound / floor; 1e-4 keeps that below 1e-8.
    pub const DEFAULT_FIT_FLOOR: f64 = 1e-4;

    pub fn fixed(nmax: usize, tail_bound: f64) -> Self {
        Self {
            nmax,
            tail_bound,
            fit_floor: Self::DEFAULT_FIT_FLOOR,
        }
    }

    /// Smallest cutoff whose thermal tails, and the quanta they carry, are
    /// both below `tail_bound`. Bounding the mass alone leaves fitted θ
    /// sensitive to the cutoff at a few times the bound.
    pub fn adaptive(params: &SystemParams, state: &ThermalState, tail_bound: f64) -> Self {
        let (x1, x2) = state.scaled(params);
        let need = |x| required_nmax(x, tail_bound).max(required_nmax_moment(x, tail_bound));
        Self::fixed(need(x1).max(need(x2)), tail_bound)
    }

    pub fn with_fit_floor(mut self, floor: f64) -> Self {
        self.fit_floor = floor;
        self
    }

    /// Rejects a cutoff that drops more than `tail_bound` of either initial
    /// thermal distribution.
    pub fn check(&self, params: &SystemParams, state: &ThermalState) -> Result<()> {
        let (x1, x2) = state.scaled(params);
        for x in [x1, x2] {
            let tail = tail_mass(x, self.nmax);
            if !(tail < self.tail_bound) {
                return Err(Error::TruncationInsufficient {
                    nmax: self.nmax,
                    required_nmax: required_nmax(x1, self.tail_bound)
                        .max(required_nmax(x2, self.tail_bound)),
                    tail_mass: tail,
                    bound: self.tail_bound,
                });
            }
        }
        Ok(())
    }
}

/// Thermal mass above `nmax`, Σ_{n>nmax} (1 − e^{−x}) e^{−xn} = e^{−x(nmax+1)}.
pub fn tail_mass(x: f64, nmax: usize) -> f64 {
    (-x * (nmax as f64 + 1.0)).exp()
}

/// Smallest `nmax` with tail mass strictly below `bound`.
pub fn required_nmax(x: f64, bound: f64) -> usize {
    let guess = ((1.0 / bound).ln() / x - 1.0).max(1.0).floor() as usize;
    let mut n = guess.saturating_sub(2).max(1);
    while !(tail_mass(x, n) < bound) {
        n += 1;
    }
    n
}

/// Quanta carried above `nmax`, Σ_{n>nmax} n (1 − e^{−x}) e^{−xn}.
pub fn tail_quanta(x: f64, nmax: usize) -> f64 {
    let m = nmax as f64 + 1.0;
    tail_mass(x, nmax) * (m + 1.0 / x.exp_m1())
}

fn required_nmax_moment(x: f64, bound: f64) -> usize {
    let mut n = required_nmax(x, bound);
    while !(tail_quanta(x, n) < bound) {
        n += 1;
    }
    n
}
