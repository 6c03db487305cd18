use serde::{Deserialize, Serialize};

use super::distribution::{interpolate, segment, validate_table, TypeDistribution};
use crate::error::{Error, Result};

/// Effort cost description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    /// `c(x) = slope * x + intercept`.
    Affine { slope: f64, intercept: f64 },
    /// `c(x) = scale * x^exponent`.
    Power { scale: f64, exponent: f64 },
    /// `c(x) = gamma * F(x)^eps`, a power of the type percentile.
    CdfPower { gamma: f64, eps: f64 },
    /// Piecewise-linear cost through `(x[i], cost[i])`.
    Tabulated { x: Vec<f64>, cost: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Affine { slope: f64, intercept: f64 },
    Power { scale: f64, exponent: f64 },
    CdfPower { gamma: f64, eps: f64, dist: Box<TypeDistribution> },
    Tabulated { x: Vec<f64>, cost: Vec<f64> },
}

/// Strictly increasing, non-negative effort cost on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFunction {
    kind: Kind,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be a positive finite number, got {v}")))
    }
}

impl CostFunction {
    pub fn affine(slope: f64, intercept: f64) -> Result<Self> {
        positive("c.slope", slope)?;
        if !(intercept.is_finite() && intercept >= 0.0) {
            return Err(Error::invalid("c.intercept", format!("cost must be non-negative, got intercept {intercept}")));
        }
        Ok(Self { kind: Kind::Affine { slope, intercept } })
    }

    pub fn power(scale: f64, exponent: f64) -> Result<Self> {
        positive("c.scale", scale)?;
        positive("c.exponent", exponent)?;
        Ok(Self { kind: Kind::Power { scale, exponent } })
    }

    pub fn cdf_power(gamma: f64, eps: f64, dist: &TypeDistribution) -> Result<Self> {
        positive("c.gamma", gamma)?;
        positive("c.eps", eps)?;
        Ok(Self {
            kind: Kind::CdfPower { gamma, eps, dist: Box::new(dist.clone()) },
        })
    }

    pub fn tabulated(x: Vec<f64>, cost: Vec<f64>) -> Result<Self> {
        validate_table(&x, "c.x")?;
        if cost.len() != x.len() {
            return Err(Error::invalid("c.cost", format!("expected {} values, got {}", x.len(), cost.len())));
        }
        if !(cost[0].is_finite() && cost[0] >= 0.0) {
            return Err(Error::invalid("c.cost[0]", "cost must be non-negative"));
        }
        for i in 1..cost.len() {
            if !(cost[i] > cost[i - 1]) {
                return Err(Error::invalid(
                    format!("c.cost[{i}]"),
                    format!("not strictly increasing ({} after {})", cost[i], cost[i - 1]),
                ));
            }
        }
        Ok(Self { kind: Kind::Tabulated { x, cost } })
    }

    /// `dist` is only consulted by [`CostSpec::CdfPower`].
    pub fn from_spec(spec: &CostSpec, dist: &TypeDistribution) -> Result<Self> {
        match spec {
            CostSpec::Affine { slope, intercept } => Self::affine(*slope, *intercept),
            CostSpec::Power { scale, exponent } => Self::power(*scale, *exponent),
            CostSpec::CdfPower { gamma, eps } => Self::cdf_power(*gamma, *eps, dist),
            CostSpec::Tabulated { x, cost } => Self::tabulated(x.clone(), cost.clone()),
        }
    }

    pub fn to_spec(&self) -> CostSpec {
        match &self.kind {
            Kind::Affine { slope, intercept } => CostSpec::Affine { slope: *slope, intercept: *intercept },
            Kind::Power { scale, exponent } => CostSpec::Power { scale: *scale, exponent: *exponent },
            Kind::CdfPower { gamma, eps, .. } => CostSpec::CdfPower { gamma: *gamma, eps: *eps },
            Kind::Tabulated { x, cost } => CostSpec::Tabulated { x: x.clone(), cost: cost.clone() },
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Affine { slope, intercept } => slope * x + intercept,
            Kind::Power { scale, exponent } => scale * x.powf(*exponent),
            Kind::CdfPower { gamma, eps, dist } => gamma * dist.cdf(x).powf(*eps),
            Kind::Tabulated { x: xs, cost } => interpolate(xs, cost, x),
        }
    }

    /// Left and right derivatives at `x`. They differ only at the knots of a
    /// tabulated cost.
    pub fn derivative(&self, x: f64) -> (f64, f64) {
        let x = x.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Affine { slope, .. } => (*slope, *slope),
            Kind::Power { scale, exponent } => {
                let d = scale * exponent * x.powf(exponent - 1.0);
                (d, d)
            }
            Kind::CdfPower { gamma, eps, dist } => {
                let d = gamma * eps * dist.cdf(x).powf(eps - 1.0) * dist.pdf(x);
                (d, d)
            }
            Kind::Tabulated { x: xs, cost } => {
                let slope = |i: usize| (cost[i + 1] - cost[i]) / (xs[i + 1] - xs[i]);
                let right = segment(xs, x);
                let left = if right > 0 && xs[right] == x { right - 1 } else { right };
                (slope(left), slope(right))
            }
        }
    }

    /// `c_{-1}`: 0 below `c(0)`, 1 above `c(1)`, the exact inverse between.
    pub fn pseudo_inverse(&self, y: f64) -> f64 {
        if y < self.value(0.0) {
            return 0.0;
        }
        if y > self.value(1.0) {
            return 1.0;
        }
        let x = match &self.kind {
            Kind::Affine { slope, intercept } => (y - intercept) / slope,
            Kind::Power { scale, exponent } => (y / scale).powf(1.0 / exponent),
            Kind::CdfPower { gamma, eps, dist } => dist.quantile((y / gamma).powf(1.0 / eps)),
            Kind::Tabulated { x, cost } => interpolate(cost, x, y),
        };
        x.clamp(0.0, 1.0)
    }
}
