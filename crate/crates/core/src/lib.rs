//! Gaussian fields indexed by the measurable sets of a measure space on the
//! real line.
//!
//! The crate simulates the centered Gaussian family `W_A` with
//! `E[W_A W_B] = sigma(A ∩ B)` through a truncated Karhunen-Loève expansion
//! on a generalized Haar basis, and verifies the laws such a field obeys:
//! Wiener and Ito isometries, quadratic variation, the Ito formula, Hermite
//! moment identities, the reproducing kernel `exp(-||chi_A - chi_B||^2 / 2)`,
//! Cameron-Martin quasi-invariance, and the agreement of path-space and
//! distribution-space realizations of stationary-increment processes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod calculus;
pub mod config;
pub mod equivalence;
pub mod error;
pub mod exec;
pub mod field;
pub mod hermite;
pub mod measure;
pub mod quadrature;
pub mod runner;
pub mod rng;
pub mod set;
pub mod spectral;
pub mod stats;

pub use basis::OrthoBasis;
pub use error::{Error, Result};
pub use exec::Parallelism;
pub use field::{FieldSample, FieldSimulator, GaussianVector, Query};
pub use measure::{Atom, Density, MeasureSpace, Partition};
pub use set::MeasurableSet;
