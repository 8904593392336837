//! Exact diagonalization of spin-1/2 Heisenberg rings with long-range
//! couplings `(1/r_jk)^α` and two-site entanglement of their uniform
//! eigenstates.
//!
//! The pipeline is `model` (Hamiltonians) → `spectral` (levels, projectors,
//! level curves) → `entanglement` (reductions, concurrence, global
//! measures) → `analysis` (α sweeps, crossings, thresholds, censuses).

// `!(x > 0.0)` is used on purpose so NaN is rejected with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod entanglement;
pub mod error;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{Alpha, RingSpec, Variant};
