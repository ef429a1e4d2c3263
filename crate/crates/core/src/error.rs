use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}` = {value}: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("Boltzmann factor {factor} outside (0, 1) for oscillator {oscillator}; {dump}")]
    BoltzmannFactorOutOfRange {
        oscillator: u8,
        factor: f64,
        dump: String,
    },

    #[error("Euler decomposition does not reconstruct the conjugated rotation (error {error:e}); {dump}")]
    BranchAmbiguity { error: f64, dump: String },

    #[error("quantity `{quantity}` expected real, imaginary residue {residue:e}")]
    NotReal { quantity: &'static str, residue: f64 },

    #[error("invalid angular momentum labels: j = {j}, m' = {m_prime}, m = {m}")]
    InvalidAngularMomentum { j: f64, m_prime: f64, m: f64 },

    #[error("truncation nmax = {nmax} insufficient: tail mass {tail_mass:e} exceeds bound {bound:e}; required nmax = {required_nmax}")]
    TruncationInsufficient {
        nmax: usize,
        required_nmax: usize,
        tail_mass: f64,
        bound: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires a {expected} density matrix")]
    WrongBasis { expected: &'static str },

    #[error("reservoir refresh requires the initial state of oscillator 2")]
    MissingReservoirState,

    #[error("propagator is not unitary: deviation {deviation:e}")]
    NonUnitary { deviation: f64 },

    #[error("occupation numbers must be non-negative, got ({n1}, {n2})")]
    NegativeOccupation { n1: i64, n2: i64 },

    #[error("state ({n1}, {n2}) does not belong to the N = {total} sector")]
    OutsideSector { n1: usize, n2: usize, total: usize },

    #[error("sector N = {total} is {reason}")]
    BadSector { total: usize, reason: &'static str },
}
