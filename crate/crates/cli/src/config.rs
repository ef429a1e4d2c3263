use std::fs;
use std::path::{Path, PathBuf};

use oscrelax::fock::{Backend, TruncationPolicy};
use oscrelax::relaxation::{RefreshMode, DEFAULT_MAX_STEPS, DEFAULT_TOL};
use oscrelax::{SystemParams, ThermalState, DEFAULT_LAMBDA};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Closed,
    Oracle,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Refresh {
    #[default]
    Mutual,
    Reservoir,
}

impl From<Refresh> for RefreshMode {
    fn from(r: Refresh) -> Self {
        match r {
            Refresh::Mutual => RefreshMode::Mutual,
            Refresh::Reservoir => RefreshMode::Reservoir,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Dense,
    #[default]
    Sector,
}

impl From<BackendChoice> for Backend {
    fn from(b: BackendChoice) -> Self {
        match b {
            BackendChoice::Dense => Backend::Dense,
            BackendChoice::Sector => Backend::Sector,
        }
    }
}

/// Everything a run needs, as one flat JSON object. Missing keys take the
/// defaults below (the equal-frequency ω = 1, τ = 2.7, T = 1 and 9 system).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub omega1: f64,
    pub omega2: f64,
    pub omega: f64,
    pub lambda: f64,
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
    /// Window budget.
    pub steps: usize,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmax: Option<usize>,
    pub tail_bound: f64,
    pub mode: Mode,
    pub refresh: Refresh,
    pub backend: BackendChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// compare: largest accepted relative θ difference; check: largest
    /// accepted |ω₁θ₁ − ω₂θ₂|.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_omega1: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_omega2: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_omega: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_tau: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_t1: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_t2: Option<Vec<f64>>,
}

pub const DEFAULT_COMPARE_BOUND: f64 = 1e-6;
pub const DEFAULT_CHECK_BOUND: f64 = 1e-8;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            omega1: 1.0,
            omega2: 1.0,
            omega: 1.0,
            lambda: DEFAULT_LAMBDA,
            tau: 2.7,
            t1: 1.0,
            t2: 9.0,
            steps: DEFAULT_MAX_STEPS,
            tol: DEFAULT_TOL,
            nmax: None,
            tail_bound: TruncationPolicy::DEFAULT_TAIL_BOUND,
            mode: Mode::Closed,
            refresh: Refresh::Mutual,
            backend: BackendChoice::Sector,
            out: None,
            bound: None,
            sweep_omega1: None,
            sweep_omega2: None,
            sweep_omega: None,
            sweep_lambda: None,
            sweep_tau: None,
            sweep_t1: None,
            sweep_t2: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serialises")
    }

    pub fn params(&self) -> Result<SystemParams, CliError> {
        Ok(SystemParams::new(
            self.omega1,
            self.omega2,
            self.omega,
            self.lambda,
            self.tau,
        )?)
    }

    pub fn initial(&self) -> Result<ThermalState, CliError> {
        Ok(ThermalState::from_temperatures(self.t1, self.t2)?)
    }

    pub fn refresh_mode(&self) -> RefreshMode {
        self.refresh.into()
    }

    /// Field-level validation of everything except the sweep grid.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        self.initial()?;
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(CliError::Config(format!(
                "invalid parameter `tol` = {}: must be positive and finite",
                self.tol
            )));
        }
        if !(self.tail_bound > 0.0 && self.tail_bound < 1.0) {
            return Err(CliError::Config(format!(
                "invalid parameter `tail_bound` = {}: must lie in (0, 1)",
                self.tail_bound
            )));
        }
        if self.nmax == Some(0) {
            return Err(CliError::Config(
                "invalid parameter `nmax` = 0: must be at least 1".into(),
            ));
        }
        if let Some(b) = self.bound {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(CliError::Config(format!(
                    "invalid parameter `bound` = {b}: must be non-negative and finite"
                )));
            }
        }
        for (name, grid) in self.sweep_axes() {
            if let Some(values) = grid {
                if values.is_empty() {
                    return Err(CliError::Config(format!("sweep axis `{name}` is empty")));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::Config(format!(
                        "sweep axis `{name}` holds a non-finite value"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sweep_axes(&self) -> [(&'static str, Option<&Vec<f64>>); 7] {
        [
            ("omega1", self.sweep_omega1.as_ref()),
            ("omega2", self.sweep_omega2.as_ref()),
            ("omega", self.sweep_omega.as_ref()),
            ("lambda", self.sweep_lambda.as_ref()),
            ("tau", self.sweep_tau.as_ref()),
            ("t1", self.sweep_t1.as_ref()),
            ("t2", self.sweep_t2.as_ref()),
        ]
    }

    /// Cartesian product of the sweep axes, last axis fastest. Axes without a
    /// grid keep the base value.
    pub fn grid(&self) -> Vec<RunConfig> {
        let mut points = vec![self.clone()];
        for (name, values) in self.sweep_axes() {
            let Some(values) = values else { continue };
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        *q.field_mut(name) = v;
                        q
                    })
                })
                .collect();
        }
        points
    }

    fn field_mut(&mut self, name: &str) -> &mut f64 {
        match name {
            "omega1" => &mut self.omega1,
            "omega2" => &mut self.omega2,
            "omega" => &mut self.omega,
            "lambda" => &mut self.lambda,
            "tau" => &mut self.tau,
            "t1" => &mut self.t1,
            "t2" => &mut self.t2,
            _ => unreachable!("unknown sweep axis {name}"),
        }
    }

    /// Cutoff for oracle runs: the explicit `nmax` if given (and checked
    /// against both initial tails), otherwise the adaptive one.
    pub fn truncation(&self) -> Result<TruncationPolicy, CliError> {
        let params = self.params()?;
        let initial = self.initial()?;
        match self.nmax {
            Some(n) => {
                let t = TruncationPolicy::fixed(n, self.tail_bound);
                t.check(&params, &initial)?;
                Ok(t)
            }
            None => Ok(TruncationPolicy::adaptive(&params, &initial, self.tail_bound)),
        }
    }
}
