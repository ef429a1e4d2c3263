use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::{tail_mass, required_nmax, TruncationPolicy};
use crate::error::{Error, Result};
use crate::relaxation::RefreshMode;

/// Ratio-fit residual above which a marginal is flagged as non-thermal.
pub const FIT_RESIDUAL_WARN: f64 = 1e-6;

/// Population floor used by [`fit_theta`].
const DEFAULT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oscillator {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// |n⟩, n = 0..=nmax
    Single { nmax: usize },
    /// |n₁ n₂⟩ in lexicographic order
    Joint { nmax: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisLabel {
    Single(usize),
    Joint(usize, usize),
}

impl Basis {
    pub fn nmax(&self) -> usize {
        match *self {
            Basis::Single { nmax } | Basis::Joint { nmax } => nmax,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Basis::Single { nmax } => nmax + 1,
            Basis::Joint { nmax } => (nmax + 1) * (nmax + 1),
        }
    }

    pub fn labels(&self) -> Vec<BasisLabel> {
        match *self {
            Basis::Single { nmax } => (0..=nmax).map(BasisLabel::Single).collect(),
            Basis::Joint { nmax } => (0..=nmax)
                .flat_map(|n1| (0..=nmax).map(move |n2| BasisLabel::Joint(n1, n2)))
                .collect(),
        }
    }

    /// Index of |n₁ n₂⟩ in a joint basis.
    pub fn joint_index(nmax: usize, n1: usize, n2: usize) -> usize {
        n1 * (nmax + 1) + n2
    }
}

/// A density matrix on a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    basis: Basis,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(basis: Basis, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { basis, matrix })
    }

    pub fn from_populations(basis: Basis, populations: &[f64]) -> Result<Self> {
        if populations.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: populations.len(),
            });
        }
        let diag = nalgebra::DVector::from_iterator(
            populations.len(),
            populations.iter().map(|&p| Complex64::new(p, 0.0)),
        );
        Ok(Self {
            basis,
            matrix: DMatrix::from_diagonal(&diag),
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn basis_labels(&self) -> Vec<BasisLabel> {
        self.basis.labels()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Real parts of the diagonal.
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if i != j {
                    worst = worst.max(m[(i, j)].norm());
                }
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Tr(ρ O).
    pub fn expectation(&self, op: &DMatrix<f64>) -> Result<Complex64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.nrows(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.matrix[(i, j)] * op[(j, i)];
            }
        }
        Ok(acc)
    }
}

/// Truncated thermal state with populations ∝ e^{−ωθn}, renormalised to
/// unit trace. The dropped tail e^{−ωθ(nmax+1)} must stay below the policy's
/// bound.
pub fn thermal_density(theta: f64, omega: f64, trunc: &TruncationPolicy) -> Result<DensityMatrix> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter {
            field: "theta",
            value: theta,
            reason: "must be positive and finite",
        });
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter {
            field: "omega",
            value: omega,
            reason: "must be positive and finite",
        });
    }
    let x = omega * theta;
    let drift = tail_mass(x, trunc.nmax);
    if !(drift < trunc.tail_bound) {
        return Err(Error::TruncationInsufficient {
            nmax: trunc.nmax,
            required_nmax: required_nmax(x, trunc.tail_bound),
            tail_mass: drift,
            bound: trunc.tail_bound,
        });
    }
    let pops = thermal_populations(x, trunc.nmax);
    DensityMatrix::from_populations(Basis::Single { nmax: trunc.nmax }, &pops)
}

/// Normalised e^{−xn}, n = 0..=nmax.
pub(crate) fn thermal_populations(x: f64, nmax: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..=nmax).map(|n| (-x * n as f64).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / z).collect()
}

/// ρ₁ ⊗ ρ₂ on the lexicographic joint basis.
pub fn tensor_product(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<DensityMatrix> {
    let (Basis::Single { nmax: n1 }, Basis::Single { nmax: n2 }) = (rho1.basis, rho2.basis) else {
        return Err(Error::WrongBasis {
            expected: "single-oscillator",
        });
    };
    if n1 != n2 {
        return Err(Error::DimensionMismatch {
            expected: n1 + 1,
            found: n2 + 1,
        });
    }
    Ok(DensityMatrix {
        basis: Basis::Joint { nmax: n1 },
        matrix: rho1.matrix.kronecker(&rho2.matrix),
    })
}

/// Reduced state of the `keep` oscillator.
pub fn partial_trace(rho12: &DensityMatrix, keep: Oscillator) -> Result<DensityMatrix> {
    let Basis::Joint { nmax } = rho12.basis else {
        return Err(Error::WrongBasis { expected: "joint" });
    };
    let d = nmax + 1;
    let m = &rho12.matrix;
    let reduced = match keep {
        Oscillator::One => DMatrix::from_fn(d, d, |i, j| {
            (0..d).map(|k| m[(i * d + k, j * d + k)]).sum()
        }),
        Oscillator::Two => DMatrix::from_fn(d, d, |i, j| {
            (0..d).map(|k| m[(k * d + i, k * d + j)]).sum()
        }),
    };
    Ok(DensityMatrix {
        basis: Basis::Single { nmax },
        matrix: reduced,
    })
}

/// Refresh after a window: mutual → Tr₂[ρ] ⊗ Tr₁[ρ]; reservoir → Tr₂[ρ] ⊗ ρ₂(0).
pub fn refresh(
    rho12: &DensityMatrix,
    mode: RefreshMode,
    rho2_initial: Option<&DensityMatrix>,
) -> Result<DensityMatrix> {
    let rho1 = partial_trace(rho12, Oscillator::One)?;
    match mode {
        RefreshMode::Mutual => {
            let rho2 = partial_trace(rho12, Oscillator::Two)?;
            tensor_product(&rho1, &rho2)
        }
        RefreshMode::Reservoir => {
            let rho2 = rho2_initial.ok_or(Error::MissingReservoirState)?;
            tensor_product(&rho1, rho2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitWarning {
    /// Individual ratio estimates disagree by more than [`FIT_RESIDUAL_WARN`].
    NonBoltzmann,
    /// The estimate sits at or below θ = 0.
    NonPositiveTheta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    /// Mean of −ln(p_{n+1}/p_n)/ω over populations above the floor.
    RatioAverage { ratios: usize },
    /// Only p₀ is above the floor: θ = −ln(Σ_{n≥1} p_n)/ω.
    GroundState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFit {
    pub theta: f64,
    /// Largest deviation of a single ratio estimate from the mean.
    pub residual: f64,
    pub off_diagonal: f64,
    pub method: FitMethod,
    pub warnings: Vec<FitWarning>,
}

impl ThetaFit {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Inverse temperature of a single-oscillator state assumed thermal.
pub fn fit_theta(rho: &DensityMatrix, omega: f64) -> Result<ThetaFit> {
    fit_theta_with_floor(rho, omega, DEFAULT_FLOOR)
}

pub fn fit_theta_with_floor(rho: &DensityMatrix, omega: f64, floor: f64) -> Result<ThetaFit> {
    let Basis::Single { .. } = rho.basis else {
        return Err(Error::WrongBasis {
            expected: "single-oscillator",
        });
    };
    let p = rho.populations();
    let estimates: Vec<f64> = p
        .windows(2)
        .take_while(|w| w[0] > floor && w[1] > floor)
        .map(|w| -(w[1] / w[0]).ln() / omega)
        .collect();

    let (theta, residual, method) = if estimates.is_empty() {
        let excited: f64 = p.iter().skip(1).sum();
        (-excited.ln() / omega, 0.0, FitMethod::GroundState)
    } else {
        let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
        let residual = estimates
            .iter()
            .map(|e| (e - mean).abs())
            .fold(0.0, f64::max);
        (
            mean,
            residual,
            FitMethod::RatioAverage {
                ratios: estimates.len(),
            },
        )
    };

    let mut warnings = Vec::new();
    if !(residual <= FIT_RESIDUAL_WARN) {
        warnings.push(FitWarning::NonBoltzmann);
    }
    if !(theta > 0.0) || !theta.is_finite() {
        warnings.push(FitWarning::NonPositiveTheta);
    }
    Ok(ThetaFit {
        theta,
        residual,
        off_diagonal: rho.max_off_diagonal(),
        method,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(nmax: usize) -> TruncationPolicy {
        TruncationPolicy::fixed(nmax, 1e-12)
    }

    #[test]
    fn thermal_state_is_geometric() {
        let rho = thermal_density(1.0, 1.0, &policy(30)).unwrap();
        let p = rho.populations();
        for n in 0..30 {
            assert!((p[n + 1] / p[n] - (-1.0f64).exp()).abs() < 1e-15);
        }
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
        assert_eq!(rho.max_off_diagonal(), 0.0);
    }

    #[test]
    fn cold_thermal_state_is_ground_projector() {
        let rho = thermal_density(50.0, 1.0, &policy(3)).unwrap();
        let p = rho.populations();
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!(p[1..].iter().all(|&q| q < 1e-21));
    }

    #[test]
    fn thermal_rejects_short_cutoff_and_bad_theta() {
        let err = thermal_density(0.1, 1.0, &policy(30)).unwrap_err();
        assert!(matches!(err, Error::TruncationInsufficient { required_nmax: 276, .. }), "{err:?}");
        assert!(thermal_density(0.0, 1.0, &policy(30)).is_err());
        assert!(thermal_density(-1.0, 1.0, &policy(30)).is_err());
    }

    #[test]
    fn partial_trace_of_product() {
        let t = TruncationPolicy::fixed(6, 1e-2);
        let r1 = thermal_density(0.9, 1.3, &t).unwrap();
        let r2 = thermal_density(2.0, 0.7, &t).unwrap();
        let joint = tensor_product(&r1, &r2).unwrap();
        assert_eq!(joint.basis_labels()[8], BasisLabel::Joint(1, 1));
        let back1 = partial_trace(&joint, Oscillator::One).unwrap();
        let back2 = partial_trace(&joint, Oscillator::Two).unwrap();
        assert!((back1.matrix() - r1.matrix()).iter().all(|z| z.norm() < 1e-15));
        assert!((back2.matrix() - r2.matrix()).iter().all(|z| z.norm() < 1e-15));
    }

    fn correlated(p: f64) -> DensityMatrix {
        // p|00⟩⟨00| + (1 − p)|11⟩⟨11| with nmax = 1
        let mut pops = vec![0.0; 4];
        pops[Basis::joint_index(1, 0, 0)] = p;
        pops[Basis::joint_index(1, 1, 1)] = 1.0 - p;
        DensityMatrix::from_populations(Basis::Joint { nmax: 1 }, &pops).unwrap()
    }

    #[test]
    fn partial_trace_of_correlated_state() {
        let rho = correlated(0.3);
        let r1 = partial_trace(&rho, Oscillator::One).unwrap();
        assert_eq!(r1.populations(), vec![0.3, 0.7]);
        assert_eq!(r1.max_off_diagonal(), 0.0);
    }

    #[test]
    fn mutual_refresh_forgets_correlations() {
        let rho = correlated(0.3);
        let out = refresh(&rho, RefreshMode::Mutual, None).unwrap();
        // diag(0.3, 0.7) ⊗ diag(0.3, 0.7)
        let expected = [0.09, 0.21, 0.21, 0.49];
        for (p, e) in out.populations().iter().zip(expected) {
            assert!((p - e).abs() < 1e-16);
        }
        assert_eq!(out.max_off_diagonal(), 0.0);
    }

    #[test]
    fn mutual_refresh_keeps_products() {
        let t = policy(4);
        let joint = tensor_product(
            &thermal_density(0.5, 1.0, &TruncationPolicy::fixed(4, 0.2)).unwrap(),
            &thermal_density(3.0, 2.0, &t).unwrap(),
        )
        .unwrap();
        let out = refresh(&joint, RefreshMode::Mutual, None).unwrap();
        assert!((out.matrix() - joint.matrix()).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn reservoir_refresh_restores_bath() {
        let bath = DensityMatrix::from_populations(Basis::Single { nmax: 1 }, &[0.9, 0.1]).unwrap();
        let rho = correlated(0.3);
        let out = refresh(&rho, RefreshMode::Reservoir, Some(&bath)).unwrap();
        let r1 = partial_trace(&rho, Oscillator::One).unwrap();
        assert_eq!(out, tensor_product(&r1, &bath).unwrap());
        assert!(matches!(
            refresh(&rho, RefreshMode::Reservoir, None),
            Err(Error::MissingReservoirState)
        ));
    }

    #[test]
    fn wrong_basis_rejected() {
        let single = thermal_density(1.0, 1.0, &policy(30)).unwrap();
        assert!(partial_trace(&single, Oscillator::One).is_err());
        assert!(fit_theta(&correlated(0.5), 1.0).is_err());
    }

    #[test]
    fn fit_recovers_thermal_theta() {
        let rho = thermal_density(0.7, 1.0, &policy(60)).unwrap();
        let fit = fit_theta(&rho, 1.0).unwrap();
        assert!((fit.theta - 0.7).abs() < 1e-12);
        assert!(fit.residual < 1e-11);
        assert!(fit.is_clean());
    }

    #[test]
    fn fit_flags_maximally_mixed() {
        let rho = DensityMatrix::from_populations(Basis::Single { nmax: 9 }, &[0.1; 10]).unwrap();
        let fit = fit_theta(&rho, 1.0).unwrap();
        assert!(fit.theta.abs() < 1e-15);
        assert!(fit.warnings.contains(&FitWarning::NonPositiveTheta));
    }

    #[test]
    fn fit_flags_non_geometric() {
        let rho = DensityMatrix::from_populations(Basis::Single { nmax: 3 }, &[0.5, 0.3, 0.15, 0.05]).unwrap();
        let fit = fit_theta(&rho, 1.0).unwrap();
        assert!(fit.residual > 0.1);
        assert!(fit.warnings.contains(&FitWarning::NonBoltzmann));
    }

    #[test]
    fn fit_falls_back_to_ground_state() {
        let t = TruncationPolicy::fixed(3, 1e-12);
        let rho = thermal_density(20.0, 1.0, &t).unwrap();
        let fit = fit_theta_with_floor(&rho, 1.0, 1e-4).unwrap();
        assert_eq!(fit.method, FitMethod::GroundState);
        assert!((fit.theta / 20.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn physicality_of_thermal_product() {
        let t = policy(8);
        let joint = tensor_product(
            &thermal_density(4.0, 1.0, &t).unwrap(),
            &thermal_density(5.0, 1.0, &t).unwrap(),
        )
        .unwrap();
        assert!(joint.hermiticity_error() == 0.0);
        assert!(joint.min_eigenvalue() > -1e-15);
        assert!((joint.trace().re - 1.0).abs() < 1e-15);
    }
}
