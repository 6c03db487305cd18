use serde::{Deserialize, Serialize};

use super::cost::{CostFunction, CostSpec};
use super::distribution::{DistributionSpec, TypeDistribution};
use crate::error::{Error, Result};

/// Number of agents `n`, number of prizes `m` and the principal's cost
/// aversion `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContestConfig {
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
}

impl ContestConfig {
    pub fn new(n: usize, m: usize, lambda: f64) -> Result<Self> {
        let cfg = Self { n, m, lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("n", format!("need at least 2 agents, got {}", self.n)));
        }
        if self.m == 0 || self.m >= self.n {
            return Err(Error::invalid("m", format!("need 0 < m < n, got m={} n={}", self.m, self.n)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be finite"));
        }
        Ok(())
    }

    /// Prize share per agent, `m / n`.
    pub fn ratio(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

/// On-disk configuration:
/// `{"n":3,"m":2,"lambda":1.0,"F":{"kind":"power","alpha":4},"c":{"kind":"affine",...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(rename = "F")]
    pub dist: DistributionSpec,
    #[serde(rename = "c")]
    pub cost: CostSpec,
}

fn default_lambda() -> f64 {
    1.0
}

/// A fully validated contest environment: configuration, type distribution
/// and effort cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub config: ContestConfig,
    pub dist: TypeDistribution,
    pub cost: CostFunction,
}

impl Instance {
    pub fn new(config: ContestConfig, dist: TypeDistribution, cost: CostFunction) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, dist, cost })
    }

    pub fn from_spec(spec: &InstanceSpec) -> Result<Self> {
        let config = ContestConfig::new(spec.n, spec.m, spec.lambda)?;
        let dist = TypeDistribution::from_spec(&spec.dist)?;
        let cost = CostFunction::from_spec(&spec.cost, &dist)?;
        Ok(Self { config, dist, cost })
    }

    pub fn to_spec(&self) -> InstanceSpec {
        InstanceSpec {
            n: self.config.n,
            m: self.config.m,
            lambda: self.config.lambda,
            dist: self.dist.to_spec(),
            cost: self.cost.to_spec(),
        }
    }

    /// `n = 3`, `m = 2`, `F(x) = x^4`, `c(x) = x/2 + 1/9`: the running
    /// example with a disconnected feasible set.
    pub fn two_interval_example() -> Self {
        Self {
            config: ContestConfig { n: 3, m: 2, lambda: 1.0 },
            dist: TypeDistribution::power(4.0).expect("valid"),
            cost: CostFunction::affine(0.5, 1.0 / 9.0).expect("valid"),
        }
    }

    /// Power family `F(x) = x^alpha`, `c = gamma F^eps`.
    pub fn power_family(n: usize, m: usize, lambda: f64, alpha: f64, gamma: f64, eps: f64) -> Result<Self> {
        let dist = TypeDistribution::power(alpha)?;
        let cost = CostFunction::cdf_power(gamma, eps, &dist)?;
        Self::new(ContestConfig::new(n, m, lambda)?, dist, cost)
    }
}
