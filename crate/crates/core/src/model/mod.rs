//! Contest primitives: type distributions, effort costs, contest
//! configuration and allocation vectors.

mod allocation;
mod config;
mod cost;
mod distribution;

pub use allocation::{AllocationVector, FamilyStart, MechanismFamily};
pub use config::{ContestConfig, Instance, InstanceSpec};
pub use cost::{CostFunction, CostSpec};
pub use distribution::{DistributionSpec, TypeDistribution};
