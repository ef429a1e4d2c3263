use super::density::{
    fit_theta_with_floor, partial_trace, tensor_product, thermal_density, Basis, DensityMatrix,
    Oscillator, ThetaFit,
};
use super::operators::{build_operators, evolve_with, Propagator};
use super::sector::{JointPopulations, SectorPropagator};
use super::{required_nmax, tail_mass, TruncationPolicy};
use crate::error::{Error, Result};
use crate::params::{SystemParams, ThermalState};
use crate::relaxation::RefreshMode;

/// Tail growth allowed after one window, in units of the tail bound.
const SHELL_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Full density matrices, dimension (nmax+1)².
    Dense,
    /// Populations only, one fixed-N block at a time.
    #[default]
    Sector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStep {
    pub new_state: ThermalState,
    pub fit1: ThetaFit,
    pub fit2: ThetaFit,
    /// Tr ρ₁₂(τ)
    pub trace: f64,
    /// Zero for the sector backend, where only populations are tracked.
    pub hermiticity_error: f64,
    pub mean_total_before: f64,
    pub mean_total_after: f64,
    pub free_energy_before: f64,
    pub free_energy_after: f64,
    /// Joint population on the box faces after the window.
    pub edge_population: f64,
}

impl OracleStep {
    /// Largest ratio-fit residual of the two marginals.
    pub fn residual(&self) -> f64 {
        self.fit1.residual.max(self.fit2.residual)
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Dense(Box<Propagator>),
    Sector(SectorPropagator),
}

/// Repeated interact-and-refresh on a truncated Fock space. The propagator
/// is built once and reused for every window.
#[derive(Debug, Clone)]
pub struct Oracle {
    params: SystemParams,
    trunc: TruncationPolicy,
    refresh: RefreshMode,
    engine: Engine,
}

impl Oracle {
    pub fn new(
        params: &SystemParams,
        trunc: TruncationPolicy,
        refresh: RefreshMode,
        backend: Backend,
    ) -> Result<Self> {
        params.validate()?;
        let engine = match backend {
            Backend::Dense => {
                let ops = build_operators(params, &trunc)?;
                let prop = Propagator::new(&ops, params.tau)?;
                Engine::Dense(Box::new(prop))
            }
            Backend::Sector => Engine::Sector(SectorPropagator::new(params, trunc.nmax, params.tau)?),
        };
        Ok(Self {
            params: *params,
            trunc,
            refresh,
            engine,
        })
    }

    /// Sector backend with the smallest cutoff meeting `tail_bound` for
    /// `initial`. Neither marginal can get hotter than the hotter initial
    /// oscillator, so the cutoff holds for the whole run.
    pub fn adaptive(
        params: &SystemParams,
        initial: &ThermalState,
        tail_bound: f64,
        refresh: RefreshMode,
    ) -> Result<Self> {
        initial.validate()?;
        let trunc = TruncationPolicy::adaptive(params, initial, tail_bound);
        Self::new(params, trunc, refresh, Backend::Sector)
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn truncation(&self) -> &TruncationPolicy {
        &self.trunc
    }

    pub fn backend(&self) -> Backend {
        match self.engine {
            Engine::Dense(_) => Backend::Dense,
            Engine::Sector(_) => Backend::Sector,
        }
    }

    pub fn step(&self, state: &ThermalState) -> Result<OracleStep> {
        state.validate()?;
        self.trunc.check(&self.params, state)?;
        let p = &self.params;
        let rho1 = thermal_density(state.theta1, p.omega1, &self.trunc)?;
        let rho2 = thermal_density(state.theta2, p.omega2, &self.trunc)?;
        let before = JointPopulations::product(&rho1.populations(), &rho2.populations())?;

        let (after, red1, red2, trace, herm) = match &self.engine {
            Engine::Dense(prop) => {
                let joint = evolve_with(&tensor_product(&rho1, &rho2)?, prop)?;
                let red1 = partial_trace(&joint, Oscillator::One)?;
                let red2 = partial_trace(&joint, Oscillator::Two)?;
                let after = JointPopulations::from_density(&joint)?;
                (after, red1, red2, joint.trace().re, joint.hermiticity_error())
            }
            Engine::Sector(sp) => {
                let after = sp.apply(&before)?;
                let (m1, m2) = after.marginals();
                let basis = Basis::Single {
                    nmax: self.trunc.nmax,
                };
                let red1 = DensityMatrix::from_populations(basis, &m1)?;
                let red2 = DensityMatrix::from_populations(basis, &m2)?;
                (after.clone(), red1, red2, after.trace(), 0.0)
            }
        };

        let fit1 = fit_theta_with_floor(&red1, p.omega1, self.trunc.fit_floor)?;
        let fit2 = fit_theta_with_floor(&red2, p.omega2, self.trunc.fit_floor)?;
        let theta2 = match self.refresh {
            RefreshMode::Mutual => fit2.theta,
            RefreshMode::Reservoir => state.theta2,
        };
        self.audit_tail(fit1.theta * p.omega1)?;
        self.audit_tail(theta2 * p.omega2)?;
        let new_state = ThermalState::new(fit1.theta, theta2)?;

        Ok(OracleStep {
            new_state,
            fit1,
            fit2,
            trace,
            hermiticity_error: herm,
            mean_total_before: before.mean_total(),
            mean_total_after: after.mean_total(),
            free_energy_before: before.mean_free_energy(p),
            free_energy_after: after.mean_free_energy(p),
            edge_population: after.edge_population(),
        })
    }

    /// `steps` windows from `initial`; element k holds the result of window k+1.
    pub fn run(&self, initial: &ThermalState, steps: usize) -> Result<Vec<OracleStep>> {
        let mut out = Vec::with_capacity(steps);
        let mut state = *initial;
        for _ in 0..steps {
            let s = self.step(&state)?;
            state = s.new_state;
            out.push(s);
        }
        Ok(out)
    }

    fn audit_tail(&self, x: f64) -> Result<()> {
        let tail = tail_mass(x, self.trunc.nmax);
        let bound = SHELL_FACTOR * self.trunc.tail_bound;
        if !(tail <= bound) {
            return Err(Error::TruncationInsufficient {
                nmax: self.trunc.nmax,
                required_nmax: if x > 0.0 {
                    required_nmax(x, self.trunc.tail_bound)
                } else {
                    usize::MAX
                },
                tail_mass: tail,
                bound,
            });
        }
        Ok(())
    }
}

/// One oracle window with the sector backend.
pub fn oracle_step(
    params: &SystemParams,
    state: &ThermalState,
    trunc: &TruncationPolicy,
    mode: RefreshMode,
) -> Result<ThermalState> {
    Ok(Oracle::new(params, *trunc, mode, Backend::Sector)?
        .step(state)?
        .new_state)
}
