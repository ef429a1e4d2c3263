//! Relaxation of two harmonic oscillators under a periodically repeated,
//! refreshed beam-splitter interaction.
//!
//! Two independent routes compute the same per-window temperature update:
//!
//! * [`relaxation`]: the closed-form map on (θ₁, θ₂) obtained from the
//!   Schwinger SU(2) representation ([`su2`]);
//! * [`fock`]: brute-force evolution of the joint density matrix on a
//!   truncated two-mode Fock space followed by partial traces.
//!
//! [`equilibrium`] holds the detailed-balance characterisation of the fixed
//! point.

// `!(x <= tol)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod fock;
pub mod params;
pub mod relaxation;
pub mod su2;

pub use error::{Error, Result};
pub use params::{SystemParams, ThermalState, DEFAULT_LAMBDA};
