use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, integrate, QUAD_TOL};

/// Parametric description of a type distribution on `[0, 1]`, as it appears
/// in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Uniform {},
    /// `F(x) = x^alpha`.
    Power { alpha: f64 },
    /// Piecewise-linear CDF through the points `(x[i], cdf[i])`.
    Tabulated { x: Vec<f64>, cdf: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Uniform,
    Power { alpha: f64 },
    Tabulated { x: Vec<f64>, cdf: Vec<f64> },
}

/// Distribution of agent types on `[0, 1]` with a density that is positive on
/// the open unit interval. Immutable after construction; the mean is computed
/// once up front.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDistribution {
    kind: Kind,
    mean: f64,
}

impl TypeDistribution {
    pub fn uniform() -> Self {
        Self { kind: Kind::Uniform, mean: 0.5 }
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("F.alpha", format!("must be a positive finite number, got {alpha}")));
        }
        Ok(Self {
            kind: Kind::Power { alpha },
            mean: alpha / (1.0 + alpha),
        })
    }

    /// Piecewise-linear CDF. The grid must start at 0 and end at 1, and both
    /// coordinates must be strictly increasing so that the density stays
    /// positive and the quantile is well defined.
    pub fn tabulated(x: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        validate_table(&x, "F.x")?;
        if cdf.len() != x.len() {
            return Err(Error::invalid("F.cdf", format!("expected {} values, got {}", x.len(), cdf.len())));
        }
        if cdf[0] != 0.0 || cdf[cdf.len() - 1] != 1.0 {
            return Err(Error::invalid("F.cdf", "must start at 0 and end at 1"));
        }
        for i in 1..cdf.len() {
            if !(cdf[i] > cdf[i - 1]) {
                return Err(Error::invalid(
                    format!("F.cdf[{i}]"),
                    format!("not strictly increasing ({} after {})", cdf[i], cdf[i - 1]),
                ));
            }
        }
        let mut dist = Self { kind: Kind::Tabulated { x, cdf }, mean: 0.0 };
        // mu = \int_0^1 (1 - F(x)) dx
        dist.mean = dist.piecewise(0.0, 1.0, |a, b| integrate(|x| 1.0 - dist.cdf(x), a, b, QUAD_TOL));
        Ok(dist)
    }

    pub fn from_spec(spec: &DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Uniform {} => Ok(Self::uniform()),
            DistributionSpec::Power { alpha } => Self::power(*alpha),
            DistributionSpec::Tabulated { x, cdf } => Self::tabulated(x.clone(), cdf.clone()),
        }
    }

    pub fn to_spec(&self) -> DistributionSpec {
        match &self.kind {
            Kind::Uniform => DistributionSpec::Uniform {},
            Kind::Power { alpha } => DistributionSpec::Power { alpha: *alpha },
            Kind::Tabulated { x, cdf } => DistributionSpec::Tabulated { x: x.clone(), cdf: cdf.clone() },
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Uniform => x,
            Kind::Power { alpha } => x.powf(*alpha),
            Kind::Tabulated { x: xs, cdf } => interpolate(xs, cdf, x),
        }
    }

    /// Density; right-continuous at the knots of a tabulated CDF.
    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match &self.kind {
            Kind::Uniform => 1.0,
            Kind::Power { alpha } => alpha * x.powf(alpha - 1.0),
            Kind::Tabulated { x: xs, cdf } => {
                let i = segment(xs, x);
                (cdf[i + 1] - cdf[i]) / (xs[i + 1] - xs[i])
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Uniform => u,
            Kind::Power { alpha } => u.powf(1.0 / alpha),
            Kind::Tabulated { x, cdf } => interpolate(cdf, x, u),
        }
    }

    /// Quantile by bisection on the CDF, independent of the closed forms.
    pub fn quantile_numeric(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        bisect(|x| self.cdf(x) - u, 0.0, 1.0, 1e-12)
    }

    /// `\int_a^b g(theta) dF(theta)` by adaptive quadrature.
    ///
    /// Power laws with `alpha < 1` have an unbounded density at 0, so they are
    /// integrated in the percentile variable `u = F(theta)` instead.
    pub fn integrate_df<G: Fn(f64) -> f64>(&self, g: G, a: f64, b: f64) -> f64 {
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if a >= b {
            return 0.0;
        }
        // Tolerance relative to the probability mass so that small tails keep
        // their relative accuracy.
        let tol = QUAD_TOL * (self.cdf(b) - self.cdf(a)).clamp(1e-6, 1.0);
        match &self.kind {
            Kind::Uniform => integrate(g, a, b, tol),
            Kind::Power { alpha } if *alpha < 1.0 => {
                let inv = 1.0 / alpha;
                integrate(|u| g(u.powf(inv)), a.powf(*alpha), b.powf(*alpha), tol)
            }
            Kind::Power { .. } => integrate(|x| g(x) * self.pdf(x), a, b, tol),
            Kind::Tabulated { .. } => self.piecewise(a, b, |lo, hi| {
                let density = self.pdf(0.5 * (lo + hi));
                density * integrate(&g, lo, hi, tol)
            }),
        }
    }

    /// Splits `[a, b]` at the knots of a tabulated CDF and sums `piece` over
    /// the parts. Other kinds are passed through whole.
    fn piecewise(&self, a: f64, b: f64, piece: impl Fn(f64, f64) -> f64) -> f64 {
        match &self.kind {
            Kind::Tabulated { x, .. } => {
                let mut total = 0.0;
                let mut lo = a;
                for &knot in x.iter().filter(|&&k| k > a && k < b) {
                    total += piece(lo, knot);
                    lo = knot;
                }
                total + piece(lo, b)
            }
            _ => piece(a, b),
        }
    }
}

pub(crate) fn validate_table(x: &[f64], field: &str) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::invalid(field, "needs at least two points"));
    }
    if x[0] != 0.0 || x[x.len() - 1] != 1.0 {
        return Err(Error::invalid(field, "grid must start at 0 and end at 1"));
    }
    for i in 1..x.len() {
        if !(x[i] > x[i - 1]) {
            return Err(Error::invalid(
                format!("{field}[{i}]"),
                format!("grid not strictly increasing ({} after {})", x[i], x[i - 1]),
            ));
        }
    }
    Ok(())
}

/// Index `i` of the segment `[xs[i], xs[i+1]]` containing `x`.
pub(crate) fn segment(xs: &[f64], x: f64) -> usize {
    let i = xs.partition_point(|&k| k <= x);
    i.saturating_sub(1).min(xs.len() - 2)
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = segment(xs, x);
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}
