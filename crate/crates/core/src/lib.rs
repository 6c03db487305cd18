//! Solver and simulator for selective contests with binary effort.
//!
//! Agents with private types in `[0, 1]` (lower is more able) choose high or
//! low effort; a symmetric mechanism allocates `m` prizes among `n` agents
//! based on the effort profile. Every symmetric equilibrium is a cutoff
//! strategy, and societal cost and selection efficiency depend on the
//! mechanism only through the cutoff it induces. The crate computes:
//!
//! - equilibrium cutoffs of a mechanism ([`equilibrium`]),
//! - cost and efficiency of a cutoff and the frontier between them ([`outcome`]),
//! - the set of cutoffs some admissible mechanism can induce, and a mechanism
//!   that induces a chosen one ([`feasible`]),
//! - the cutoff maximising `eta - lambda * C` via concavification ([`optimal`]),
//! - Monte Carlo play of a contest ([`simulate`]),
//! - closed forms for the power family `F = x^alpha`, `c = gamma F^eps`
//!   ([`statics`]).

// Negated comparisons are used on purpose so that NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod feasible;
pub mod model;
pub mod numeric;
pub mod optimal;
pub mod outcome;
pub mod simulate;
pub mod statics;

pub use error::{Error, Result};
pub use model::{AllocationVector, ContestConfig, CostFunction, Instance, MechanismFamily, TypeDistribution};
