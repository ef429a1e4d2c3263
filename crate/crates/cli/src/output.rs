use std::io::{Read, Write};

use oscrelax::relaxation::{ConvergenceStatus, Trajectory, TrajectoryRecord};

use crate::error::CliError;

pub const TRAJECTORY_HEADER: [&str; 10] = [
    "step",
    "n_tau",
    "T1",
    "T2",
    "theta1",
    "theta2",
    "w1_theta1",
    "w2_theta2",
    "nbar_total",
    "converged",
];

/// 17 significant digits, enough to round-trip any f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<(), CliError> {
    let converged_at = match traj.status {
        ConvergenceStatus::Converged { step } => Some(step),
        ConvergenceStatus::BudgetExhausted => None,
    };
    let mut out = writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for r in &traj.records {
        out.write_record([
            r.step.to_string(),
            num(r.elapsed),
            num(r.t1),
            num(r.t2),
            num(r.theta1),
            num(r.theta2),
            num(r.w1_theta1),
            num(r.w2_theta2),
            num(r.nbar_total),
            (converged_at == Some(r.step)).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Rows of a trajectory CSV plus the step flagged as converged, if any.
pub fn read_trajectory<R: Read>(r: R) -> Result<(Vec<TrajectoryRecord>, Option<usize>), CliError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != TRAJECTORY_HEADER {
        return Err(CliError::Config(format!(
            "unexpected trajectory header: {}",
            header.join(",")
        )));
    }
    let mut records = Vec::new();
    let mut converged = None;
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |i: usize| -> Result<f64, CliError> {
            row[i].trim().parse::<f64>().map_err(|e| {
                CliError::Config(format!(
                    "row {}: column `{}`: {e}",
                    line + 1,
                    TRAJECTORY_HEADER[i]
                ))
            })
        };
        let step: usize = row[0]
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("row {}: column `step`: {e}", line + 1)))?;
        let flag = match row[9].trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(CliError::Config(format!(
                    "row {}: column `converged`: expected true or false, got {other:?}",
                    line + 1
                )))
            }
        };
        if flag {
            converged = Some(step);
        }
        records.push(TrajectoryRecord {
            step,
            elapsed: field(1)?,
            t1: field(2)?,
            t2: field(3)?,
            theta1: field(4)?,
            theta2: field(5)?,
            w1_theta1: field(6)?,
            w2_theta2: field(7)?,
            nbar_total: field(8)?,
        });
    }
    if records.is_empty() {
        return Err(CliError::Config("trajectory has no rows".into()));
    }
    Ok((records, converged))
}
