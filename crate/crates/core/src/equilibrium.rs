//! Detailed balance over fixed-N sectors and the equilibrium condition
//! ω₁θ₁ = ω₂θ₂.
//!
//! The hopping term only moves a quantum between the oscillators, so states
//! with the same N = n₁ + n₂ form closed sectors. At a fixed point every
//! sector is uniformly populated once the Boltzmann weights are divided out.

use crate::error::{Error, Result};
use crate::fock::{Basis, DensityMatrix, JointPopulations};
use crate::params::{SystemParams, ThermalState};
use crate::relaxation::{predict_fixed_point, Trajectory};

/// Sector populations below this total are treated as empty.
const EMPTY_SECTOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// (n₁, n₂) → (n₁ + 1, n₂ − 1)
    Raise1,
    /// (n₁, n₂) → (n₁ − 1, n₂ + 1)
    Raise2,
}

/// Matrix element of the hopping term for one quantum moving between the
/// oscillators.
pub fn transition_amplitude(n1: i64, n2: i64, direction: Direction, params: &SystemParams) -> Result<f64> {
    if n1 < 0 || n2 < 0 {
        return Err(Error::NegativeOccupation { n1, n2 });
    }
    let (n1, n2) = (n1 as f64, n2 as f64);
    let g = params.coupling();
    Ok(match direction {
        Direction::Raise1 => g * (n2 * (n1 + 1.0)).sqrt(),
        Direction::Raise2 => g * (n1 * (n2 + 1.0)).sqrt(),
    })
}

/// Probabilities of the N + 1 states (n₁, N − n₁), indexed by n₁.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorDistribution {
    pub total: usize,
    pub probs: Vec<f64>,
}

impl SectorDistribution {
    pub fn new(total: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != total + 1 {
            return Err(Error::DimensionMismatch {
                expected: total + 1,
                found: probs.len(),
            });
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::BadSector {
                total,
                reason: "carrying a negative or NaN probability",
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::BadSector {
                total,
                reason: "not normalised",
            });
        }
        Ok(Self { total, probs })
    }

    /// Renormalises non-negative weights over the sector.
    pub fn from_weights(total: usize, weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum >= EMPTY_SECTOR) {
            return Err(Error::BadSector {
                total,
                reason: "empty",
            });
        }
        Self::new(total, weights.into_iter().map(|w| w / sum).collect())
    }

    /// ν = n₁ − n₂ for each entry.
    pub fn nu(&self) -> Vec<i64> {
        (0..=self.total as i64)
            .map(|n1| 2 * n1 - self.total as i64)
            .collect()
    }

    pub fn prob(&self, n1: usize, n2: usize) -> Result<f64> {
        if n1 + n2 != self.total {
            return Err(Error::OutsideSector {
                n1,
                n2,
                total: self.total,
            });
        }
        Ok(self.probs[n1])
    }

    /// Largest deviation from 1/(N + 1).
    pub fn uniformity_error(&self) -> f64 {
        let u = 1.0 / (self.total as f64 + 1.0);
        self.probs.iter().map(|p| (p - u).abs()).fold(0.0, f64::max)
    }
}

pub fn uniform_sector(total: usize) -> SectorDistribution {
    SectorDistribution {
        total,
        probs: vec![1.0 / (total as f64 + 1.0); total + 1],
    }
}

/// Outflow minus inflow at (n₁, n₂) for the squared hopping amplitudes:
/// P(n₁,n₂)[2n₁n₂ + n₁ + n₂] − P(n₁−1,n₂+1)·n₁(n₂+1) − P(n₁+1,n₂−1)·n₂(n₁+1).
pub fn balance_residual(dist: &SectorDistribution, n1: usize, n2: usize) -> Result<f64> {
    let p = dist.prob(n1, n2)?;
    let (a, b) = (n1 as f64, n2 as f64);
    let from_left = if n1 > 0 { dist.probs[n1 - 1] } else { 0.0 };
    let from_right = if n2 > 0 { dist.probs[n1 + 1] } else { 0.0 };
    Ok(p * (2.0 * a * b + a + b) - from_left * a * (b + 1.0) - from_right * b * (a + 1.0))
}

/// Sector N of a joint state's diagonal, renormalised within the sector.
pub fn sector_distribution_from_density(rho12: &DensityMatrix, total: usize) -> Result<SectorDistribution> {
    let Basis::Joint { .. } = rho12.basis() else {
        return Err(Error::WrongBasis { expected: "joint" });
    };
    sector_distribution_from_populations(&JointPopulations::from_density(rho12)?, total)
}

pub fn sector_distribution_from_populations(
    pops: &JointPopulations,
    total: usize,
) -> Result<SectorDistribution> {
    if total > pops.nmax {
        return Err(Error::BadSector {
            total,
            reason: "cut by the truncation",
        });
    }
    let weights = (0..=total).map(|n1| pops.get(n1, total - n1)).collect();
    SectorDistribution::from_weights(total, weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub converged: bool,
    pub final_step: usize,
    pub final_state: ThermalState,
    /// |ω₁θ₁ − ω₂θ₂| at the last record.
    pub condition_gap: f64,
    pub tol: f64,
    pub condition_met: bool,
    /// First record with gap ≤ tol.
    pub first_step_met: Option<usize>,
    pub equal_frequencies: bool,
    /// Fixed point predicted from n̄₁ + n̄₂ of the first record.
    pub predicted: ThermalState,
    /// Largest |Tᵢ(∞) − Tᵢ predicted|.
    pub prediction_gap: f64,
    /// (T₁(0) + T₂(0)) / 2
    pub mean_initial_temperature: f64,
    /// Equal frequencies only: common final temperature and its relative
    /// distance from the mean initial temperature.
    pub common_temperature: Option<f64>,
    pub mean_temperature_gap: Option<f64>,
}

impl EquilibriumReport {
    /// Final temperatures agree, so a single temperature describes the pair.
    pub fn single_temperature(&self, tol: f64) -> bool {
        let s = &self.final_state;
        (s.t1() - s.t2()).abs() <= tol * s.t1().max(s.t2())
    }
}

pub fn check_equilibrium_condition(traj: &Trajectory, tol: f64) -> Result<EquilibriumReport> {
    let p = &traj.params;
    let gap = |s: &ThermalState| {
        let (x1, x2) = s.scaled(p);
        (x1 - x2).abs()
    };
    let initial = traj.initial();
    let last = traj.last();
    let final_state = last.state();
    let condition_gap = gap(&final_state);
    let first_step_met = traj
        .records
        .iter()
        .find(|r| gap(&r.state()) <= tol)
        .map(|r| r.step);
    let predicted = predict_fixed_point(p, &initial)?;
    let prediction_gap = (final_state.t1() - predicted.t1())
        .abs()
        .max((final_state.t2() - predicted.t2()).abs());
    let mean_initial_temperature = 0.5 * (initial.t1() + initial.t2());
    let equal_frequencies = p.equal_frequencies();
    let common_temperature = equal_frequencies.then(|| 0.5 * (final_state.t1() + final_state.t2()));
    let mean_temperature_gap =
        common_temperature.map(|t| (t - mean_initial_temperature).abs() / mean_initial_temperature);
    Ok(EquilibriumReport {
        converged: traj.converged(),
        final_step: last.step,
        final_state,
        condition_gap,
        tol,
        condition_met: condition_gap <= tol,
        first_step_met,
        equal_frequencies,
        predicted,
        prediction_gap,
        mean_initial_temperature,
        common_temperature,
        mean_temperature_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{tensor_product, thermal_density, TruncationPolicy};
    use crate::relaxation::iterate;

    fn params() -> SystemParams {
        SystemParams::new(1.0, 1.0, 0.5, 0.2, 1.0).unwrap()
    }

    #[test]
    fn amplitudes() {
        let p = params();
        let g = p.coupling();
        assert_eq!(transition_amplitude(0, 0, Direction::Raise1, &p).unwrap(), 0.0);
        assert_eq!(transition_amplitude(0, 0, Direction::Raise2, &p).unwrap(), 0.0);
        let a = transition_amplitude(1, 1, Direction::Raise1, &p).unwrap();
        assert!((a - g * 2f64.sqrt()).abs() < 1e-16);
        for (n1, n2) in [(0, 3), (4, 1), (7, 7), (2, 9)] {
            assert_eq!(
                transition_amplitude(n1, n2, Direction::Raise1, &p).unwrap(),
                transition_amplitude(n2, n1, Direction::Raise2, &p).unwrap()
            );
        }
        assert!(matches!(
            transition_amplitude(-1, 2, Direction::Raise1, &p),
            Err(Error::NegativeOccupation { n1: -1, n2: 2 })
        ));
    }

    #[test]
    fn balance_examples() {
        let half = SectorDistribution::new(1, vec![0.5, 0.5]).unwrap();
        assert_eq!(balance_residual(&half, 1, 0).unwrap(), 0.0);
        assert_eq!(balance_residual(&half, 0, 1).unwrap(), 0.0);

        let third = uniform_sector(2);
        for n1 in 0..=2 {
            assert!(balance_residual(&third, n1, 2 - n1).unwrap().abs() < 1e-15);
        }

        // P(0,2)=0.5, P(1,1)=0.3, P(2,0)=0.2
        let skew = SectorDistribution::new(2, vec![0.5, 0.3, 0.2]).unwrap();
        // 0.3·4 − 0.5·2 − 0.2·2
        assert!((balance_residual(&skew, 1, 1).unwrap() - (-0.2)).abs() < 1e-15);
        assert!((balance_residual(&skew, 0, 2).unwrap() - 0.4).abs() < 1e-15);

        assert!(matches!(
            balance_residual(&skew, 2, 1),
            Err(Error::OutsideSector { .. })
        ));
    }

    #[test]
    fn uniform_sectors_balance() {
        assert_eq!(uniform_sector(0).probs, vec![1.0]);
        for total in 0..=50 {
            let d = uniform_sector(total);
            for n1 in 0..=total {
                let r = balance_residual(&d, n1, total - n1).unwrap();
                assert!(r.abs() <= 1e-12, "N={total} n1={n1} r={r}");
            }
        }
        let d = uniform_sector(7);
        for n1 in 0..=7 {
            assert!(balance_residual(&d, n1, 7 - n1).unwrap().abs() <= 1e-15);
        }
    }

    #[test]
    fn nu_labels() {
        assert_eq!(uniform_sector(3).nu(), vec![-3, -1, 1, 3]);
    }

    fn product(p: &SystemParams, s: &ThermalState) -> DensityMatrix {
        let t = TruncationPolicy::adaptive(p, s, 1e-12);
        tensor_product(
            &thermal_density(s.theta1, p.omega1, &t).unwrap(),
            &thermal_density(s.theta2, p.omega2, &t).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_products_have_uniform_sectors() {
        let p = SystemParams::new(1.0, 3.0, 1.0, 1.0, 1.0).unwrap();
        let s = ThermalState::from_temperatures(2.0, 6.0).unwrap();
        let rho = product(&p, &s);
        for total in [0, 1, 2, 5, 9] {
            let d = sector_distribution_from_density(&rho, total).unwrap();
            assert!(d.uniformity_error() <= 1e-12, "N={total}");
        }
    }

    #[test]
    fn off_equilibrium_sector_is_geometric() {
        let p = SystemParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = ThermalState::new(0.9, 0.4).unwrap();
        let d = sector_distribution_from_density(&product(&p, &s), 2).unwrap();
        let ratio = (-(0.9f64 - 0.4)).exp();
        assert!((d.probs[1] / d.probs[0] - ratio).abs() < 1e-12);
        assert!((d.probs[2] / d.probs[1] - ratio).abs() < 1e-12);
        assert!(d.uniformity_error() > 1e-3);
    }

    #[test]
    fn sector_extraction_errors() {
        let p = SystemParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let cold = ThermalState::new(40.0, 40.0).unwrap();
        let rho = product(&p, &cold);
        assert_eq!(sector_distribution_from_density(&rho, 0).unwrap().probs, vec![1.0]);
        assert!(matches!(
            sector_distribution_from_density(&rho, 1),
            Err(Error::BadSector { reason: "empty", .. })
        ));
        assert!(sector_distribution_from_density(&rho, rho.basis().nmax() + 1).is_err());
    }

    #[test]
    fn equal_case_trajectory_report() {
        let p = SystemParams::new(1.0, 1.0, 1.0, 1.0, 2.7).unwrap();
        let s = ThermalState::from_temperatures(1.0, 9.0).unwrap();
        let traj = iterate(&p, &s, 100_000, 1e-10).unwrap();
        let r = check_equilibrium_condition(&traj, 1e-8).unwrap();
        assert!(r.converged && r.condition_met);
        assert!(r.mean_temperature_gap.unwrap() < 0.02);
        assert!(r.prediction_gap < 1e-6);
        assert!(r.single_temperature(1e-8));
    }

    #[test]
    fn unequal_case_trajectory_report() {
        let p = SystemParams::new(10.0, 4.0, 5.0, 1.0, 1.5).unwrap();
        let s = ThermalState::from_temperatures(8.0, 2.0).unwrap();
        let traj = iterate(&p, &s, 100_000, 1e-10).unwrap();
        let r = check_equilibrium_condition(&traj, 1e-8).unwrap();
        assert!(r.converged && r.condition_met);
        assert!(r.common_temperature.is_none());
        assert!(!r.single_temperature(1e-3));
    }

    #[test]
    fn fixed_point_start_meets_condition_at_once() {
        let p = SystemParams::new(1.0, 3.0, 1.0, 1.0, 0.8).unwrap();
        let s = ThermalState::from_temperatures(2.0, 6.0).unwrap();
        let traj = iterate(&p, &s, 10, 1e-10).unwrap();
        let r = check_equilibrium_condition(&traj, 1e-8).unwrap();
        assert_eq!(r.first_step_met, Some(0));
        assert!(r.condition_met);
    }
}
