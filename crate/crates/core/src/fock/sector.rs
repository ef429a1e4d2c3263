use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use super::density::{Basis, DensityMatrix};
use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Diagonal of a joint density matrix, index n₁·(nmax+1) + n₂.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPopulations {
    pub nmax: usize,
    pub data: Vec<f64>,
}

impl JointPopulations {
    pub fn product(p1: &[f64], p2: &[f64]) -> Result<Self> {
        if p1.len() != p2.len() || p1.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: p1.len(),
                found: p2.len(),
            });
        }
        let data = p1
            .iter()
            .flat_map(|&a| p2.iter().map(move |&b| a * b))
            .collect();
        Ok(Self {
            nmax: p1.len() - 1,
            data,
        })
    }

    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        let Basis::Joint { nmax } = rho.basis() else {
            return Err(Error::WrongBasis { expected: "joint" });
        };
        Ok(Self {
            nmax,
            data: rho.populations(),
        })
    }

    pub fn get(&self, n1: usize, n2: usize) -> f64 {
        self.data[Basis::joint_index(self.nmax, n1, n2)]
    }

    pub fn trace(&self) -> f64 {
        self.data.iter().sum()
    }

    /// (Tr₂, Tr₁) populations.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.nmax + 1;
        let mut p1 = vec![0.0; d];
        let mut p2 = vec![0.0; d];
        for (row, m1) in self.data.chunks(d).zip(p1.iter_mut()) {
            for (p, m2) in row.iter().zip(p2.iter_mut()) {
                *m1 += p;
                *m2 += p;
            }
        }
        (p1, p2)
    }

    /// ⟨n₁ + n₂⟩
    pub fn mean_total(&self) -> f64 {
        let d = self.nmax + 1;
        self.data
            .iter()
            .enumerate()
            .map(|(i, p)| ((i / d) + (i % d)) as f64 * p)
            .sum()
    }

    /// ⟨ω₁n₁ + ω₂n₂⟩
    pub fn mean_free_energy(&self, params: &SystemParams) -> f64 {
        let d = self.nmax + 1;
        self.data
            .iter()
            .enumerate()
            .map(|(i, p)| (params.omega1 * (i / d) as f64 + params.omega2 * (i % d) as f64) * p)
            .sum()
    }

    /// Total population with N = n₁ + n₂ equal to `total`.
    pub fn sector_mass(&self, total: usize) -> f64 {
        let (lo, hi) = sector_range(self.nmax, total);
        (lo..=hi).map(|n1| self.get(n1, total - n1)).sum()
    }

    /// Population on the box faces n₁ = nmax or n₂ = nmax.
    pub fn edge_population(&self) -> f64 {
        let n = self.nmax;
        let face: f64 = (0..=n).map(|k| self.get(n, k) + self.get(k, n)).sum();
        face - self.get(n, n)
    }
}

/// Range of n₁ for states (n₁, N − n₁) inside the box.
pub(crate) fn sector_range(nmax: usize, total: usize) -> (usize, usize) {
    (total.saturating_sub(nmax), total.min(nmax))
}

#[derive(Debug, Clone)]
struct Block {
    lo: usize,
    /// |⟨i|U|j⟩|²
    transfer: DMatrix<f64>,
}

/// Population transfer of exp(−iHτ) restricted to each fixed-N block.
///
/// For a diagonal initial state only |Uᵢⱼ|² matters, and the reduced states
/// stay diagonal because coherences live between states of equal N.
#[derive(Debug, Clone)]
pub struct SectorPropagator {
    nmax: usize,
    tau: f64,
    blocks: Vec<Block>,
}

impl SectorPropagator {
    pub fn new(params: &SystemParams, nmax: usize, tau: f64) -> Result<Self> {
        params.validate()?;
        if nmax < 1 {
            return Err(Error::InvalidParameter {
                field: "nmax",
                value: nmax as f64,
                reason: "must be at least 1",
            });
        }
        let blocks = (0..=2 * nmax)
            .map(|total| block(params, nmax, total, tau))
            .collect::<Result<_>>()?;
        Ok(Self { nmax, tau, blocks })
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.blocks.iter().map(|b| b.transfer.len() * 8).sum()
    }

    pub fn apply(&self, pops: &JointPopulations) -> Result<JointPopulations> {
        if pops.nmax != self.nmax {
            return Err(Error::DimensionMismatch {
                expected: self.nmax + 1,
                found: pops.nmax + 1,
            });
        }
        let mut out = vec![0.0; pops.data.len()];
        for (total, b) in self.blocks.iter().enumerate() {
            let k = b.transfer.nrows();
            let idx = |i: usize| Basis::joint_index(self.nmax, b.lo + i, total - b.lo - i);
            let p = DVector::from_iterator(k, (0..k).map(|i| pops.data[idx(i)]));
            let q = &b.transfer * p;
            for i in 0..k {
                out[idx(i)] = q[i];
            }
        }
        Ok(JointPopulations {
            nmax: self.nmax,
            data: out,
        })
    }
}

fn block(params: &SystemParams, nmax: usize, total: usize, tau: f64) -> Result<Block> {
    let (lo, hi) = sector_range(nmax, total);
    let k = hi - lo + 1;
    let half = total as f64 / 2.0;
    let detuning = params.omega1 - params.omega2;
    let g = params.coupling();
    // constant ω₂N dropped: it only contributes a global phase
    let h = Mat::<f64>::from_fn(k, k, |i, j| {
        let n1 = lo + i.min(j);
        if i == j {
            detuning * (n1 as f64 - half)
        } else if i.abs_diff(j) == 1 {
            let n2 = total - n1;
            g * (((n1 + 1) * n2) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::BadSector {
            total,
            reason: "not diagonalisable (eigensolver did not converge)",
        })?;
    let v = eig.U();
    let energies = eig.S().column_vector();
    let (sin, cos): (Vec<f64>, Vec<f64>) = (0..k).map(|j| (energies[j] * tau).sin_cos()).unzip();
    let re = Mat::<f64>::from_fn(k, k, |i, j| v[(i, j)] * cos[j]) * v.transpose();
    let im = Mat::<f64>::from_fn(k, k, |i, j| v[(i, j)] * sin[j]) * v.transpose();
    let transfer = DMatrix::from_fn(k, k, |i, j| re[(i, j)].powi(2) + im[(i, j)].powi(2));
    Ok(Block { lo, transfer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::density::thermal_populations;
    use crate::fock::{build_operators, evolve, TruncationPolicy};

    #[test]
    fn transfer_is_doubly_stochastic() {
        let p = SystemParams::new(1.0, 2.5, 0.7, 1.0, 1.9).unwrap();
        let sp = SectorPropagator::new(&p, 6, p.tau).unwrap();
        for b in &sp.blocks {
            for r in 0..b.transfer.nrows() {
                assert!((b.transfer.row(r).sum() - 1.0).abs() < 1e-13);
                assert!((b.transfer.column(r).sum() - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn matches_dense_evolution() {
        let nmax = 7;
        let p = SystemParams::new(1.0, 1.7, 0.9, 0.6, 2.3).unwrap();
        let p1 = thermal_populations(0.8, nmax);
        let p2 = thermal_populations(2.1, nmax);
        let pops = JointPopulations::product(&p1, &p2).unwrap();
        let rho = DensityMatrix::from_populations(Basis::Joint { nmax }, &pops.data).unwrap();
        let ops = build_operators(&p, &TruncationPolicy::fixed(nmax, 1e-12)).unwrap();
        let dense = JointPopulations::from_density(&evolve(&rho, &ops, p.tau).unwrap()).unwrap();
        let fast = SectorPropagator::new(&p, nmax, p.tau).unwrap().apply(&pops).unwrap();
        for (a, b) in dense.data.iter().zip(&fast.data) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn conserves_sector_masses() {
        let nmax = 10;
        let p = SystemParams::new(3.0, 1.0, 2.0, 0.4, 0.77).unwrap();
        let pops = JointPopulations::product(
            &thermal_populations(0.3, nmax),
            &thermal_populations(1.5, nmax),
        )
        .unwrap();
        let out = SectorPropagator::new(&p, nmax, p.tau).unwrap().apply(&pops).unwrap();
        for total in 0..=2 * nmax {
            assert!((pops.sector_mass(total) - out.sector_mass(total)).abs() < 1e-15);
        }
        assert!((pops.mean_total() - out.mean_total()).abs() < 1e-12);
    }

    #[test]
    fn marginals_of_product() {
        let a = [0.5, 0.3, 0.2];
        let b = [0.6, 0.3, 0.1];
        let j = JointPopulations::product(&a, &b).unwrap();
        let (m1, m2) = j.marginals();
        for i in 0..3 {
            assert!((m1[i] - a[i]).abs() < 1e-16);
            assert!((m2[i] - b[i]).abs() < 1e-16);
        }
        assert!((j.edge_population() - (0.2 + 0.1 - 0.02)).abs() < 1e-16);
    }
}
