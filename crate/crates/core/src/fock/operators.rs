use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::density::{Basis, DensityMatrix};
use super::TruncationPolicy;
use crate::error::{Error, Result};
use crate::params::SystemParams;

const UNITARITY_TOL: f64 = 1e-11;

/// Ladder operators and Hamiltonians on the joint truncated basis. All of
/// them are real in the number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet {
    pub nmax: usize,
    pub a1: DMatrix<f64>,
    pub a1dag: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub a2dag: DMatrix<f64>,
    pub h1: DMatrix<f64>,
    pub h2: DMatrix<f64>,
    pub hint: DMatrix<f64>,
    pub htotal: DMatrix<f64>,
    /// N = n₁ + n₂
    pub number: DMatrix<f64>,
}

impl OperatorSet {
    pub fn dim(&self) -> usize {
        self.htotal.nrows()
    }

    pub fn basis(&self) -> Basis {
        Basis::Joint { nmax: self.nmax }
    }
}

fn annihilation(nmax: usize) -> DMatrix<f64> {
    let d = nmax + 1;
    DMatrix::from_fn(d, d, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}

pub fn build_operators(params: &SystemParams, trunc: &TruncationPolicy) -> Result<OperatorSet> {
    params.validate()?;
    if trunc.nmax < 1 {
        return Err(Error::InvalidParameter {
            field: "nmax",
            value: trunc.nmax as f64,
            reason: "must be at least 1",
        });
    }
    let d = trunc.nmax + 1;
    let a = annihilation(trunc.nmax);
    let id = DMatrix::<f64>::identity(d, d);
    let a1 = a.kronecker(&id);
    let a2 = id.kronecker(&a);
    let a1dag = a1.transpose();
    let a2dag = a2.transpose();
    let n1 = &a1dag * &a1;
    let n2 = &a2dag * &a2;
    let h1 = &n1 * params.omega1;
    let h2 = &n2 * params.omega2;
    let hint = (&a1dag * &a2 + &a2dag * &a1) * params.coupling();
    let htotal = &h1 + &h2 + &hint;
    Ok(OperatorSet {
        nmax: trunc.nmax,
        a1,
        a1dag,
        a2,
        a2dag,
        h1,
        h2,
        hint,
        htotal,
        number: n1 + n2,
    })
}

/// exp(−iHτ) from the eigendecomposition of H.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub tau: f64,
    pub unitary: DMatrix<Complex64>,
    /// max |(UU† − I)ᵢⱼ|
    pub unitarity_error: f64,
}

impl Propagator {
    pub fn new(ops: &OperatorSet, tau: f64) -> Result<Self> {
        let eig = SymmetricEigen::new(ops.htotal.clone());
        let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let phases = nalgebra::DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&e| Complex64::from_polar(1.0, -e * tau)),
        );
        let unitary = &v * DMatrix::from_diagonal(&phases) * v.transpose();
        let d = unitary.nrows();
        let gram = &unitary * unitary.adjoint();
        let unitarity_error = (gram - DMatrix::<Complex64>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if !(unitarity_error <= UNITARITY_TOL) {
            return Err(Error::NonUnitary {
                deviation: unitarity_error,
            });
        }
        Ok(Self {
            tau,
            unitary,
            unitarity_error,
        })
    }
}

/// U ρ U† with U = exp(−i H_total τ).
pub fn evolve(rho12: &DensityMatrix, ops: &OperatorSet, tau: f64) -> Result<DensityMatrix> {
    check_dims(rho12, ops.dim())?;
    evolve_with(rho12, &Propagator::new(ops, tau)?)
}

pub fn evolve_with(rho12: &DensityMatrix, prop: &Propagator) -> Result<DensityMatrix> {
    check_dims(rho12, prop.unitary.nrows())?;
    let u = &prop.unitary;
    let out = u * rho12.matrix() * u.adjoint();
    DensityMatrix::new(rho12.basis(), out)
}

fn check_dims(rho: &DensityMatrix, dim: usize) -> Result<()> {
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho.dim(),
        });
    }
    if !matches!(rho.basis(), Basis::Joint { .. }) {
        return Err(Error::WrongBasis { expected: "joint" });
    }
    Ok(())
}
