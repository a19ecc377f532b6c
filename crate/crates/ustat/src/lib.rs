//! Constrained and unconstrained U-statistics over stationary m-dependent
//! sequences.
//!
//! The crate provides exact reference evaluators and fast counters for
//! gap-constrained subsequence and permutation-pattern statistics, exact and
//! Monte-Carlo computation of asymptotic means and variances through the
//! one-variable projection machinery, degeneracy diagnostics, a simulation
//! harness for the limit theorems (central limit, rate, moments, functional,
//! renewal), and the orthogonal-decomposition toolkit for i.i.d.
//! finite-alphabet strings.

pub mod blocks;
pub mod constraint;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod named;
pub mod patterns;
pub mod poly;
pub mod seq;
pub mod simulate;
pub mod spectral;

pub use constraint::{Constraint, Gap, Mode};
pub use error::{Error, Result};
pub use eval::{EvalOptions, Value};
pub use kernel::{Alphabet, Domain, Kernel};
pub use model::SequenceModel;
pub use seq::ObsSeq;
