use std::io::{Read, Write};

use oscrelax::equilibrium::{check_equilibrium_condition, EquilibriumReport};
use oscrelax::fock::{Oracle, OracleStep};
use oscrelax::relaxation::{
    iterate_map, iterate_with, predict_fixed_point, predict_reservoir_fixed_point,
    ConvergenceStatus, RefreshMode, Trajectory,
};
use oscrelax::{SystemParams, ThermalState};
use rayon::prelude::*;

use crate::config::{Mode, RunConfig, DEFAULT_CHECK_BOUND, DEFAULT_COMPARE_BOUND};
use crate::error::{exit, CliError};
use crate::output::{num, read_trajectory, write_trajectory, writer};

/// Distance from the predicted fixed point that counts as relaxed in sweeps.
pub const SETTLE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    /// One-line human summary for stderr.
    pub summary: String,
}

fn status_code(traj: &Trajectory) -> i32 {
    if traj.converged() {
        exit::OK
    } else {
        exit::BUDGET
    }
}

fn summarize(label: &str, traj: &Trajectory) -> String {
    let last = traj.last();
    match traj.status {
        ConvergenceStatus::Converged { step } => format!(
            "{label}: converged at step {step}: T1 = {}, T2 = {}",
            last.t1, last.t2
        ),
        ConvergenceStatus::BudgetExhausted => format!(
            "{label}: step budget exhausted after {} steps: T1 = {}, T2 = {}",
            last.step, last.t1, last.t2
        ),
    }
}

pub fn closed_trajectory(cfg: &RunConfig) -> Result<Trajectory, CliError> {
    cfg.validate()?;
    Ok(iterate_with(
        &cfg.params()?,
        &cfg.initial()?,
        cfg.steps,
        cfg.tol,
        cfg.refresh_mode(),
    )?)
}

pub fn build_oracle(cfg: &RunConfig) -> Result<Oracle, CliError> {
    cfg.validate()?;
    Ok(Oracle::new(
        &cfg.params()?,
        cfg.truncation()?,
        cfg.refresh_mode(),
        cfg.backend.into(),
    )?)
}

pub fn oracle_trajectory(cfg: &RunConfig) -> Result<Trajectory, CliError> {
    let oracle = build_oracle(cfg)?;
    Ok(iterate_map(
        &cfg.params()?,
        &cfg.initial()?,
        cfg.steps,
        cfg.tol,
        cfg.refresh_mode(),
        |s| Ok(oracle.step(s)?.new_state),
    )?)
}

/// `simulate`, dispatching on the configured mode.
pub fn run_simulate<W: Write>(cfg: &RunConfig, out: W) -> Result<Outcome, CliError> {
    match cfg.mode {
        Mode::Closed => {
            let traj = closed_trajectory(cfg)?;
            write_trajectory(out, &traj)?;
            Ok(Outcome {
                code: status_code(&traj),
                summary: summarize("closed form", &traj),
            })
        }
        Mode::Oracle => run_oracle(cfg, out),
        Mode::Compare => run_compare(cfg, out),
    }
}

pub fn run_oracle<W: Write>(cfg: &RunConfig, out: W) -> Result<Outcome, CliError> {
    let traj = oracle_trajectory(cfg)?;
    write_trajectory(out, &traj)?;
    Ok(Outcome {
        code: status_code(&traj),
        summary: summarize("oracle", &traj),
    })
}

pub const COMPARE_HEADER: [&str; 15] = [
    "step",
    "n_tau",
    "theta1_closed",
    "theta2_closed",
    "theta1_oracle",
    "theta2_oracle",
    "abs_diff1",
    "abs_diff2",
    "rel_diff1",
    "rel_diff2",
    "fit_residual",
    "nmax",
    "tail_bound",
    "edge_population",
    "n_total_drift",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub step: usize,
    pub closed: ThermalState,
    pub oracle: ThermalState,
    pub diag: Option<OracleStep>,
}

impl CompareRow {
    pub fn rel_diffs(&self) -> (f64, f64) {
        (
            (self.oracle.theta1 - self.closed.theta1).abs() / self.closed.theta1,
            (self.oracle.theta2 - self.closed.theta2).abs() / self.closed.theta2,
        )
    }

    pub fn max_rel_diff(&self) -> f64 {
        let (a, b) = self.rel_diffs();
        a.max(b)
    }
}

/// Closed form and oracle side by side, each driven by its own output.
/// Runs `steps` windows, or fewer if the closed form converges first.
pub fn compare_rows(cfg: &RunConfig) -> Result<(Vec<CompareRow>, Oracle), CliError> {
    let closed = closed_trajectory(cfg)?;
    let oracle = build_oracle(cfg)?;
    let mut rows = vec![CompareRow {
        step: 0,
        closed: closed.initial(),
        oracle: closed.initial(),
        diag: None,
    }];
    let mut state = closed.initial();
    for rec in closed.records.iter().skip(1) {
        let o = oracle.step(&state)?;
        state = o.new_state;
        rows.push(CompareRow {
            step: rec.step,
            closed: rec.state(),
            oracle: state,
            diag: Some(o),
        });
    }
    Ok((rows, oracle))
}

pub fn run_compare<W: Write>(cfg: &RunConfig, out: W) -> Result<Outcome, CliError> {
    let bound = cfg.bound.unwrap_or(DEFAULT_COMPARE_BOUND);
    let (rows, oracle) = compare_rows(cfg)?;
    let trunc = *oracle.truncation();
    let mut w = writer(out);
    w.write_record(COMPARE_HEADER)?;
    let mut worst: f64 = 0.0;
    for r in &rows {
        let (rel1, rel2) = r.rel_diffs();
        worst = worst.max(rel1).max(rel2);
        let (resid, edge, drift) = match &r.diag {
            Some(d) => (
                d.residual(),
                d.edge_population,
                d.mean_total_after - d.mean_total_before,
            ),
            None => (0.0, 0.0, 0.0),
        };
        w.write_record([
            r.step.to_string(),
            num(r.step as f64 * cfg.tau),
            num(r.closed.theta1),
            num(r.closed.theta2),
            num(r.oracle.theta1),
            num(r.oracle.theta2),
            num((r.oracle.theta1 - r.closed.theta1).abs()),
            num((r.oracle.theta2 - r.closed.theta2).abs()),
            num(rel1),
            num(rel2),
            num(resid),
            trunc.nmax.to_string(),
            num(trunc.tail_bound),
            num(edge),
            num(drift),
        ])?;
    }
    w.flush()?;
    let code = if worst <= bound { exit::OK } else { exit::BOUND };
    Ok(Outcome {
        code,
        summary: format!(
            "compare: {} steps at nmax = {}: max relative difference {worst:e} (bound {bound:e})",
            rows.len() - 1,
            trunc.nmax
        ),
    })
}

pub const SWEEP_HEADER: [&str; 18] = [
    "index",
    "omega1",
    "omega2",
    "omega",
    "lambda",
    "tau",
    "T1_0",
    "T2_0",
    "status",
    "iterations",
    "steps_to_convergence",
    "n_tau_to_convergence",
    "T1",
    "T2",
    "T1_predicted",
    "T2_predicted",
    "condition_residual",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub config: RunConfig,
    pub result: Result<SweepResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub converged: bool,
    /// Windows until |Δθ| < tol.
    pub iterations: usize,
    /// First step with both |Tᵢ − Tᵢ(∞)| < [`SETTLE_TOL`].
    pub settle_step: Option<usize>,
    pub final_state: ThermalState,
    pub predicted: ThermalState,
    /// |ω₁θ₁ − ω₂θ₂| at the last step.
    pub condition_residual: f64,
}

impl SweepResult {
    pub fn settle_time(&self, tau: f64) -> Option<f64> {
        self.settle_step.map(|n| n as f64 * tau)
    }
}

pub fn sweep_point(cfg: &RunConfig) -> Result<SweepResult, CliError> {
    let traj = closed_trajectory(cfg)?;
    let params: SystemParams = cfg.params()?;
    let initial = cfg.initial()?;
    let predicted = match cfg.refresh_mode() {
        RefreshMode::Mutual => predict_fixed_point(&params, &initial)?,
        RefreshMode::Reservoir => predict_reservoir_fixed_point(&params, &initial)?,
    };
    let settle_step = traj
        .records
        .iter()
        .find(|r| {
            (r.t1 - predicted.t1()).abs() < SETTLE_TOL && (r.t2 - predicted.t2()).abs() < SETTLE_TOL
        })
        .map(|r| r.step);
    let last = traj.last();
    Ok(SweepResult {
        converged: traj.converged(),
        iterations: last.step,
        settle_step,
        final_state: last.state(),
        predicted,
        condition_residual: (last.w1_theta1 - last.w2_theta2).abs(),
    })
}

/// Every grid point, in grid order; failures are kept in their row.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepPoint>, CliError> {
    cfg.validate()?;
    if cfg.mode != Mode::Closed {
        return Err(CliError::Config(
            "sweep runs the closed form only; use mode = closed".into(),
        ));
    }
    Ok(cfg
        .grid()
        .into_par_iter()
        .map(|c| {
            let result = sweep_point(&c).map_err(|e| e.to_string());
            SweepPoint { config: c, result }
        })
        .collect())
}

pub fn run_sweep<W: Write>(cfg: &RunConfig, out: W) -> Result<Outcome, CliError> {
    let points = sweep(cfg)?;
    let mut w = writer(out);
    w.write_record(SWEEP_HEADER)?;
    let mut failed = 0;
    let mut unconverged = 0;
    for (i, p) in points.iter().enumerate() {
        let c = &p.config;
        let mut row = vec![
            i.to_string(),
            num(c.omega1),
            num(c.omega2),
            num(c.omega),
            num(c.lambda),
            num(c.tau),
            num(c.t1),
            num(c.t2),
        ];
        match &p.result {
            Ok(r) => {
                if !r.converged {
                    unconverged += 1;
                }
                row.extend([
                    if r.converged { "converged" } else { "budget_exhausted" }.to_string(),
                    r.iterations.to_string(),
                    r.settle_step.map(|n| n.to_string()).unwrap_or_default(),
                    r.settle_time(c.tau).map(num).unwrap_or_default(),
                    num(r.final_state.t1()),
                    num(r.final_state.t2()),
                    num(r.predicted.t1()),
                    num(r.predicted.t2()),
                    num(r.condition_residual),
                    String::new(),
                ]);
            }
            Err(e) => {
                failed += 1;
                row.extend(["error".to_string()]);
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(e.clone());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let code = if failed == 0 && unconverged == 0 {
        exit::OK
    } else if failed == 0 {
        exit::BUDGET
    } else {
        exit::CONFIG
    };
    Ok(Outcome {
        code,
        summary: format!(
            "sweep: {} points, {failed} failed, {unconverged} out of budget",
            points.len()
        ),
    })
}

/// Equilibrium report for a trajectory CSV written by `simulate`. The
/// frequencies come from the config and must match the file's ωθ columns.
pub fn check_trajectory<R: Read>(cfg: &RunConfig, input: R) -> Result<EquilibriumReport, CliError> {
    cfg.validate()?;
    let params = cfg.params()?;
    let (records, converged_at) = read_trajectory(input)?;
    for r in &records {
        for (w, theta, wt, name) in [
            (params.omega1, r.theta1, r.w1_theta1, "omega1"),
            (params.omega2, r.theta2, r.w2_theta2, "omega2"),
        ] {
            if (w * theta - wt).abs() > 1e-9 * wt.abs().max(1.0) {
                return Err(CliError::Config(format!(
                    "step {}: `{name}` = {w} does not match the trajectory's ωθ column",
                    r.step
                )));
            }
        }
    }
    let status = match converged_at {
        Some(step) => ConvergenceStatus::Converged { step },
        None => ConvergenceStatus::BudgetExhausted,
    };
    let traj = Trajectory {
        params,
        refresh: cfg.refresh_mode(),
        records,
        status,
    };
    Ok(check_equilibrium_condition(
        &traj,
        cfg.bound.unwrap_or(DEFAULT_CHECK_BOUND),
    )?)
}

pub fn run_check<R: Read, W: Write>(cfg: &RunConfig, input: R, out: W) -> Result<Outcome, CliError> {
    let r = check_trajectory(cfg, input)?;
    let mut w = writer(out);
    w.write_record(["quantity", "value"])?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let rows: Vec<(&str, String)> = vec![
        ("converged", r.converged.to_string()),
        ("final_step", r.final_step.to_string()),
        ("T1", num(r.final_state.t1())),
        ("T2", num(r.final_state.t2())),
        ("condition_gap", num(r.condition_gap)),
        ("condition_tol", num(r.tol)),
        ("condition_met", r.condition_met.to_string()),
        (
            "first_step_met",
            r.first_step_met.map(|n| n.to_string()).unwrap_or_default(),
        ),
        ("equal_frequencies", r.equal_frequencies.to_string()),
        ("T1_predicted", num(r.predicted.t1())),
        ("T2_predicted", num(r.predicted.t2())),
        ("prediction_gap", num(r.prediction_gap)),
        ("mean_initial_temperature", num(r.mean_initial_temperature)),
        ("common_temperature", opt(r.common_temperature)),
        ("mean_temperature_gap", opt(r.mean_temperature_gap)),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;
    let code = if !r.converged {
        exit::BUDGET
    } else if r.condition_met {
        exit::OK
    } else {
        exit::BOUND
    };
    Ok(Outcome {
        code,
        summary: format!(
            "check: |w1*theta1 - w2*theta2| = {:e}, condition {}",
            r.condition_gap,
            if r.condition_met { "met" } else { "not met" }
        ),
    })
}
