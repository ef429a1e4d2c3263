//! Physical parameters and the thermal state of the oscillator pair.
//!
//! Units: k = ħ = t₀ = 1. Frequencies are in 1/t₀, times in t₀, and
//! temperatures are plain numbers with θ = 1/T.

use crate::error::{Error, Result};

/// Frequencies, coupling and interaction window of the two-oscillator system.
///
/// The Hamiltonian is `ω₁ a₁†a₁ + ω₂ a₂†a₂ + ωλ (a₁†a₂ + a₂†a₁)`, applied for a
/// window `τ` between refreshes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega1: f64,
    pub omega2: f64,
    /// Interaction frequency ω.
    pub omega_int: f64,
    /// Dimensionless coupling strength λ.
    pub lambda: f64,
    /// Interaction window τ.
    pub tau: f64,
}

/// Coupling used when none is given; equilibria do not depend on it.
pub const DEFAULT_LAMBDA: f64 = 1.0;

impl SystemParams {
    pub fn new(omega1: f64, omega2: f64, omega_int: f64, lambda: f64, tau: f64) -> Result<Self> {
        let params = Self {
            omega1,
            omega2,
            omega_int,
            lambda,
            tau,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        positive_finite("omega1", self.omega1)?;
        positive_finite("omega2", self.omega2)?;
        positive_finite("omega", self.omega_int)?;
        positive_finite("tau", self.tau)?;
        if !self.lambda.is_finite() {
            return Err(Error::InvalidParameter {
                field: "lambda",
                value: self.lambda,
                reason: "must be finite",
            });
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParameter {
                field: "lambda",
                value: self.lambda,
                reason: "must be non-negative",
            });
        }
        Ok(())
    }

    /// Same system with the oscillator labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            omega1: self.omega2,
            omega2: self.omega1,
            ..*self
        }
    }

    /// Hopping amplitude ωλ of the beam-splitter term.
    pub fn coupling(&self) -> f64 {
        self.omega_int * self.lambda
    }

    pub fn equal_frequencies(&self) -> bool {
        (self.omega1 - self.omega2).abs() <= 1e-12 * self.omega1.max(self.omega2)
    }
}

/// Inverse temperatures of the two oscillators. This is the whole state of the
/// closed-form iteration, since every refreshed marginal is thermal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalState {
    pub theta1: f64,
    pub theta2: f64,
}

impl ThermalState {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        positive_finite("theta1", theta1)?;
        positive_finite("theta2", theta2)?;
        Ok(Self { theta1, theta2 })
    }

    pub fn from_temperatures(t1: f64, t2: f64) -> Result<Self> {
        positive_finite("T1", t1)?;
        positive_finite("T2", t2)?;
        Self::new(1.0 / t1, 1.0 / t2)
    }

    pub fn validate(&self) -> Result<()> {
        positive_finite("theta1", self.theta1)?;
        positive_finite("theta2", self.theta2)
    }

    pub fn swapped(&self) -> Self {
        Self {
            theta1: self.theta2,
            theta2: self.theta1,
        }
    }

    pub fn t1(&self) -> f64 {
        1.0 / self.theta1
    }

    pub fn t2(&self) -> f64 {
        1.0 / self.theta2
    }

    /// Boltzmann exponents (ω₁θ₁, ω₂θ₂).
    pub fn scaled(&self, params: &SystemParams) -> (f64, f64) {
        (params.omega1 * self.theta1, params.omega2 * self.theta2)
    }

    pub fn nbar1(&self, params: &SystemParams) -> f64 {
        mean_occupation(params.omega1 * self.theta1)
    }

    pub fn nbar2(&self, params: &SystemParams) -> f64 {
        mean_occupation(params.omega2 * self.theta2)
    }

    pub fn nbar_total(&self, params: &SystemParams) -> f64 {
        self.nbar1(params) + self.nbar2(params)
    }
}

/// Bose–Einstein occupation 1/(eˣ − 1) for x = ωθ.
pub fn mean_occupation(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

/// Inverse of [`mean_occupation`]: x = ln(1 + 1/n̄).
pub fn scaled_theta_from_occupation(nbar: f64) -> f64 {
    (1.0 / nbar).ln_1p()
}

/// Single-oscillator partition function 1/(1 − e^{−x}).
pub fn partition_function(x: f64) -> f64 {
    -1.0 / (-x).exp_m1()
}

fn positive_finite(field: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter {
            field,
            value,
            reason: "must be finite",
        });
    }
    if value <= 0.0 {
        return Err(Error::InvalidParameter {
            field,
            value,
            reason: "must be positive",
        });
    }
    Ok(())
}
