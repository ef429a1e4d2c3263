//! Closed-form interact–refresh–repeat map on the inverse temperatures.
//!
//! After one window the reduced state of oscillator 1 is again thermal, with
//!
//! ```text
//! e^{-ω₁θ₁(τ)} = [cos(β/2) e^{Θ+δ} − 1] / (e^{Θ−δ} [e^{Θ+δ} − cos(β/2)])
//! ```
//!
//! where Θ = ½(ω₁θ₁ + ω₂θ₂). Oscillator 2 follows from relabelling 1 ↔ 2,
//! which flips the signs of a and c and leaves b and Θ alone.

use crate::error::{Error, Result};
use crate::params::{partition_function, scaled_theta_from_occupation, SystemParams, ThermalState};
use crate::su2::{compute_abcd, compute_euler, compute_step_coefficients};

/// Default convergence threshold on |Δθ| per step.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default step budget.
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

/// What happens to oscillator 2 at each refresh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefreshMode {
    /// Both oscillators keep their own evolved marginal.
    #[default]
    Mutual,
    /// Oscillator 2 is reset to its initial state (bath).
    Reservoir,
}

/// Result of advancing one oscillator through one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub new_state: ThermalState,
    /// The oscillator's updated inverse temperature.
    pub theta: f64,
    /// e^{−ωθ(τ)}
    pub boltzmann_factor: f64,
    /// Θ = ½(ω₁θ₁ + ω₂θ₂)
    pub theta_aux: f64,
    pub delta: f64,
    pub cos_beta_half: f64,
    /// Z[θ(τ)] = Z₁Z₂[1 − cos(β/2) e^{−(Θ+δ)}]
    pub partition_z: f64,
}

/// Both refreshed marginals from one evolved joint state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPair {
    pub oscillator1: StepResult,
    pub oscillator2: StepResult,
    pub new_state: ThermalState,
}

/// Acceptable slack on the (0, 1) range of the Boltzmann factor.
const FACTOR_SLACK: f64 = 1e-15;

/// Advances oscillator 1 through one window.
pub fn step_oscillator1(params: &SystemParams, state: &ThermalState) -> Result<StepResult> {
    let coeffs = compute_step_coefficients(params, state)?;
    let abcd = compute_abcd(&coeffs);
    let euler = compute_euler(&coeffs, &abcd)?;

    let (x1, x2) = state.scaled(params);
    let theta_aux = 0.5 * (x1 + x2);
    let cbh = euler.cos_beta_half;
    let delta = euler.delta;

    // Same ratio as the displayed form, divided through by e^{Θ+δ}.
    let u = (-(theta_aux + delta)).exp();
    let factor = (-(theta_aux - delta)).exp() * (cbh - u) / (1.0 - cbh * u);

    let dump = || {
        format!(
            "a = {:e}, b = {:e}, c = {:e}, d = {:e}, Theta = {:e}, delta = {:e}, cos(beta/2) = {:e}",
            coeffs.a, coeffs.b, coeffs.c.im, coeffs.d, theta_aux, delta, cbh
        )
    };
    if !(factor > -FACTOR_SLACK && factor < 1.0 + FACTOR_SLACK) || !factor.is_finite() {
        return Err(Error::BoltzmannFactorOutOfRange {
            oscillator: 1,
            factor,
            dump: dump(),
        });
    }
    let theta = -factor.ln() / params.omega1;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::BoltzmannFactorOutOfRange {
            oscillator: 1,
            factor,
            dump: dump(),
        });
    }
    let partition_z = partition_function(x1) * partition_function(x2) * (1.0 - cbh * u);

    Ok(StepResult {
        new_state: ThermalState {
            theta1: theta,
            theta2: state.theta2,
        },
        theta,
        boltzmann_factor: factor,
        theta_aux,
        delta,
        cos_beta_half: cbh,
        partition_z,
    })
}

/// Advances oscillator 2 through one window by relabelling the oscillators.
pub fn step_oscillator2(params: &SystemParams, state: &ThermalState) -> Result<StepResult> {
    let swapped = step_oscillator1(&params.swapped(), &state.swapped()).map_err(|e| match e {
        Error::BoltzmannFactorOutOfRange { factor, dump, .. } => Error::BoltzmannFactorOutOfRange {
            oscillator: 2,
            factor,
            dump,
        },
        other => other,
    })?;
    Ok(StepResult {
        new_state: ThermalState {
            theta1: state.theta1,
            theta2: swapped.theta,
        },
        ..swapped
    })
}

/// One interact–refresh cycle. Both marginals come from the same evolved
/// joint state.
pub fn step(params: &SystemParams, state: &ThermalState) -> Result<StepPair> {
    let oscillator1 = step_oscillator1(params, state)?;
    let oscillator2 = step_oscillator2(params, state)?;
    Ok(StepPair {
        new_state: ThermalState {
            theta1: oscillator1.theta,
            theta2: oscillator2.theta,
        },
        oscillator1,
        oscillator2,
    })
}

/// One cycle under the given refresh rule. In reservoir mode oscillator 2 is
/// put back to `bath`.
pub fn step_with(
    params: &SystemParams,
    state: &ThermalState,
    refresh: RefreshMode,
    bath: f64,
) -> Result<ThermalState> {
    match refresh {
        RefreshMode::Mutual => Ok(step(params, state)?.new_state),
        RefreshMode::Reservoir => Ok(ThermalState {
            theta1: step_oscillator1(params, state)?.theta,
            theta2: bath,
        }),
    }
}

/// One row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    /// nτ
    pub elapsed: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub t1: f64,
    pub t2: f64,
    pub w1_theta1: f64,
    pub w2_theta2: f64,
    pub nbar_total: f64,
}

impl TrajectoryRecord {
    pub fn new(step: usize, params: &SystemParams, state: &ThermalState) -> Self {
        Self {
            step,
            elapsed: step as f64 * params.tau,
            theta1: state.theta1,
            theta2: state.theta2,
            t1: state.t1(),
            t2: state.t2(),
            w1_theta1: params.omega1 * state.theta1,
            w2_theta2: params.omega2 * state.theta2,
            nbar_total: state.nbar_total(params),
        }
    }

    pub fn state(&self) -> ThermalState {
        ThermalState {
            theta1: self.theta1,
            theta2: self.theta2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceStatus {
    /// Both |Δθ| fell below the tolerance at this step.
    Converged { step: usize },
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: SystemParams,
    pub refresh: RefreshMode,
    pub records: Vec<TrajectoryRecord>,
    pub status: ConvergenceStatus,
}

impl Trajectory {
    pub fn converged(&self) -> bool {
        matches!(self.status, ConvergenceStatus::Converged { .. })
    }

    pub fn initial(&self) -> ThermalState {
        self.records[0].state()
    }

    pub fn last(&self) -> &TrajectoryRecord {
        self.records.last().expect("trajectory always holds its initial state")
    }

    /// Largest deviation of n̄₁ + n̄₂ from its initial value.
    pub fn nbar_drift(&self) -> f64 {
        let n0 = self.records[0].nbar_total;
        self.records
            .iter()
            .map(|r| (r.nbar_total - n0).abs())
            .fold(0.0, f64::max)
    }
}

/// Repeats [`step`] until both |θᵢ(n+1) − θᵢ(n)| < `tol` or `max_steps` is
/// reached. Running out of steps is a status, not an error.
pub fn iterate(
    params: &SystemParams,
    initial: &ThermalState,
    max_steps: usize,
    tol: f64,
) -> Result<Trajectory> {
    iterate_with(params, initial, max_steps, tol, RefreshMode::Mutual)
}

pub fn iterate_with(
    params: &SystemParams,
    initial: &ThermalState,
    max_steps: usize,
    tol: f64,
    refresh: RefreshMode,
) -> Result<Trajectory> {
    iterate_map(params, initial, max_steps, tol, refresh, |s| {
        step_with(params, s, refresh, initial.theta2)
    })
}

/// Shared driver: `advance` maps a state to the next refreshed state.
pub fn iterate_map<F>(
    params: &SystemParams,
    initial: &ThermalState,
    max_steps: usize,
    tol: f64,
    refresh: RefreshMode,
    mut advance: F,
) -> Result<Trajectory>
where
    F: FnMut(&ThermalState) -> Result<ThermalState>,
{
    params.validate()?;
    initial.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            field: "tol",
            value: tol,
            reason: "must be positive",
        });
    }
    let mut records = vec![TrajectoryRecord::new(0, params, initial)];
    let mut state = *initial;
    let mut status = ConvergenceStatus::BudgetExhausted;
    for n in 1..=max_steps {
        let next = advance(&state)?;
        records.push(TrajectoryRecord::new(n, params, &next));
        let settled =
            (next.theta1 - state.theta1).abs() < tol && (next.theta2 - state.theta2).abs() < tol;
        state = next;
        if settled {
            status = ConvergenceStatus::Converged { step: n };
            break;
        }
    }
    Ok(Trajectory {
        params: *params,
        refresh,
        records,
        status,
    })
}

/// Fixed point of the mutual map reached from `initial`.
///
/// The map conserves n̄₁ + n̄₂ and its fixed points satisfy ω₁θ₁ = ω₂θ₂ = x, so
/// both oscillators end with occupation n̄_tot/2 and x = ln(1 + 2/n̄_tot).
pub fn predict_fixed_point(params: &SystemParams, initial: &ThermalState) -> Result<ThermalState> {
    params.validate()?;
    initial.validate()?;
    let x = scaled_theta_from_occupation(0.5 * initial.nbar_total(params));
    ThermalState::new(x / params.omega1, x / params.omega2)
}

/// Fixed point with oscillator 2 held as a bath: ω₁θ₁ = ω₂θ₂(0).
pub fn predict_reservoir_fixed_point(
    params: &SystemParams,
    initial: &ThermalState,
) -> Result<ThermalState> {
    params.validate()?;
    initial.validate()?;
    ThermalState::new(params.omega2 * initial.theta2 / params.omega1, initial.theta2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::mean_occupation;
    use std::f64::consts::PI;

    /// Independent route: a beam splitter sends thermal product states to
    /// thermal marginals with n̄₁' = (1 − R) n̄₁ + R n̄₂, R the Rabi transfer
    /// probability (ωλ/Ω)² sin²(Ωτ).
    fn gaussian_channel(params: &SystemParams, state: &ThermalState) -> ThermalState {
        let g = params.coupling();
        let omega_r = (0.5 * (params.omega1 - params.omega2)).hypot(g);
        let r = if omega_r == 0.0 {
            0.0
        } else {
            (g / omega_r).powi(2) * (omega_r * params.tau).sin().powi(2)
        };
        let (n1, n2) = (state.nbar1(params), state.nbar2(params));
        let m1 = (1.0 - r) * n1 + r * n2;
        let m2 = r * n1 + (1.0 - r) * n2;
        ThermalState {
            theta1: scaled_theta_from_occupation(m1) / params.omega1,
            theta2: scaled_theta_from_occupation(m2) / params.omega2,
        }
    }

    fn equal_case() -> (SystemParams, ThermalState) {
        (
            SystemParams::new(1.0, 1.0, 1.0, 1.0, 2.7).unwrap(),
            ThermalState::from_temperatures(1.0, 9.0).unwrap(),
        )
    }

    fn unequal_case() -> (SystemParams, ThermalState) {
        (
            SystemParams::new(10.0, 4.0, 5.0, 1.0, 1.5).unwrap(),
            ThermalState::from_temperatures(8.0, 2.0).unwrap(),
        )
    }

    #[test]
    fn fixed_point_is_invariant() {
        let params = SystemParams::new(1.0, 3.0, 5.0, 1.0, 1.5).unwrap();
        let state = ThermalState::from_temperatures(2.0, 6.0).unwrap();
        let out = step(&params, &state).unwrap();
        assert!((out.new_state.theta1 - state.theta1).abs() <= 1e-12);
        assert!((out.new_state.theta2 - state.theta2).abs() <= 1e-12);
    }

    #[test]
    fn equal_case_step_matches_gaussian_channel() {
        let (params, state) = equal_case();
        let out = step(&params, &state).unwrap();
        let expected = gaussian_channel(&params, &state);
        assert!((out.new_state.theta1 / expected.theta1 - 1.0).abs() < 1e-12);
        assert!((out.new_state.theta2 / expected.theta2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unequal_case_step_matches_gaussian_channel() {
        let (params, state) = unequal_case();
        let out = step(&params, &state).unwrap();
        let expected = gaussian_channel(&params, &state);
        assert!((out.new_state.theta1 / expected.theta1 - 1.0).abs() < 1e-12);
        assert!((out.new_state.theta2 / expected.theta2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_rabi_period_is_identity() {
        // a = 0, b = 2π, so d = π.
        let params = SystemParams::new(1.0, 1.0, 1.0, 1.0, PI).unwrap();
        let state = ThermalState::from_temperatures(1.0, 9.0).unwrap();
        let out = step(&params, &state).unwrap();
        assert!((out.new_state.theta1 - state.theta1).abs() <= 1e-10);
        assert!((out.new_state.theta2 - state.theta2).abs() <= 1e-10);
    }

    #[test]
    fn zero_coupling_is_identity() {
        let params = SystemParams::new(2.0, 0.7, 1.0, 0.0, 1.3).unwrap();
        let state = ThermalState::from_temperatures(0.8, 5.0).unwrap();
        let out = step(&params, &state).unwrap();
        assert!((out.new_state.theta1 - state.theta1).abs() <= 1e-12);
        assert!((out.new_state.theta2 - state.theta2).abs() <= 1e-12);
    }

    #[test]
    fn equal_temperatures_equal_frequencies_stay_put() {
        let params = SystemParams::new(1.5, 1.5, 2.0, 0.4, 0.9).unwrap();
        let state = ThermalState::from_temperatures(3.0, 3.0).unwrap();
        let out = step_oscillator2(&params, &state).unwrap();
        assert!((out.theta - state.theta2).abs() <= 1e-12);
    }

    #[test]
    fn partition_function_is_geometric() {
        let (params, state) = unequal_case();
        for r in [step_oscillator1(&params, &state).unwrap(), step_oscillator2(&params, &state).unwrap()] {
            let geometric = 1.0 / (1.0 - r.boltzmann_factor);
            assert!((r.partition_z / geometric - 1.0).abs() < 1e-10);
            assert!(r.boltzmann_factor > 0.0 && r.boltzmann_factor < 1.0);
        }
    }

    #[test]
    fn budget_zero_keeps_initial_only() {
        let (params, state) = equal_case();
        let traj = iterate(&params, &state, 0, DEFAULT_TOL).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.status, ConvergenceStatus::BudgetExhausted);
        assert_eq!(traj.records[0].t2, 9.0);
    }

    #[test]
    fn equal_case_converges_to_conservation_prediction() {
        let (params, state) = equal_case();
        let traj = iterate(&params, &state, DEFAULT_MAX_STEPS, DEFAULT_TOL).unwrap();
        assert!(traj.converged());
        let last = traj.last();
        let predicted = predict_fixed_point(&params, &state).unwrap();
        assert!((last.t1 - predicted.t1()).abs() < 1e-6);
        assert!((last.t2 - predicted.t2()).abs() < 1e-6);
        assert!(traj.nbar_drift() < 1e-9);
    }

    #[test]
    fn unequal_case_reaches_scaled_equality() {
        let (params, state) = unequal_case();
        let traj = iterate(&params, &state, DEFAULT_MAX_STEPS, DEFAULT_TOL).unwrap();
        assert!(traj.converged());
        let last = traj.last();
        assert!((last.w1_theta1 - last.w2_theta2).abs() <= 1e-8);
    }

    #[test]
    fn prediction_values() {
        let (params, state) = equal_case();
        let p = predict_fixed_point(&params, &state).unwrap();
        let n_tot = mean_occupation(1.0) + mean_occupation(1.0 / 9.0);
        let t = 1.0 / (1.0 + 2.0 / n_tot).ln();
        assert!((p.t1() - t).abs() < 1e-12 && (p.t2() - t).abs() < 1e-12);
        assert!((p.t1() - 5.03).abs() < 5e-3);

        let (params, state) = unequal_case();
        let p = predict_fixed_point(&params, &state).unwrap();
        assert!((p.t1() - 6.57).abs() < 1e-2, "{}", p.t1());
        assert!((p.t2() - 2.63).abs() < 1e-2, "{}", p.t2());

        let already = ThermalState::from_temperatures(2.0, 6.0).unwrap();
        let params = SystemParams::new(1.0, 3.0, 5.0, 1.0, 1.5).unwrap();
        let p = predict_fixed_point(&params, &already).unwrap();
        assert!((p.theta1 - already.theta1).abs() < 1e-14);
        assert!((p.theta2 - already.theta2).abs() < 1e-14);
    }

    #[test]
    fn reservoir_mode_holds_bath() {
        let (params, state) = unequal_case();
        let traj = iterate_with(&params, &state, DEFAULT_MAX_STEPS, DEFAULT_TOL, RefreshMode::Reservoir).unwrap();
        assert!(traj.converged());
        assert!(traj.records.iter().all(|r| r.theta2 == state.theta2));
        let expected = predict_reservoir_fixed_point(&params, &state).unwrap();
        assert!((traj.last().theta1 - expected.theta1).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let (params, state) = equal_case();
        assert!(iterate(&params, &state, 10, 0.0).is_err());
    }
}
