//! Closed forms for the power family `F(x) = x^alpha`, `c = gamma F^eps`
//! and parameter sweeps of the optimal cutoff.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ContestConfig, Instance};
use crate::numeric::bisect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFamily {
    pub alpha: f64,
    pub gamma: f64,
    pub eps: f64,
}

impl PowerFamily {
    pub fn new(alpha: f64, gamma: f64, eps: f64) -> Result<Self> {
        for (name, x) in [("alpha", alpha), ("gamma", gamma), ("eps", eps)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::invalid(name, "must be positive and finite"));
            }
        }
        Ok(Self { alpha, gamma, eps })
    }

    pub fn instance(&self, config: &ContestConfig) -> Result<Instance> {
        Instance::power_family(config.n, config.m, config.lambda, self.alpha, self.gamma, self.eps)
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (1.0 + self.alpha)
    }

    fn exponent(&self) -> f64 {
        (self.eps + 1.0) * self.alpha
    }

    /// `C(s) = gamma / (eps + 1) * s^((eps + 1) alpha)`.
    pub fn cost(&self, s: f64) -> f64 {
        self.gamma / (self.eps + 1.0) * s.powf(self.exponent())
    }

    /// `eta(s) = (n/m) gamma s^((eps + 1) alpha) (1 - s)`.
    pub fn efficiency(&self, s: f64, config: &ContestConfig) -> f64 {
        self.gamma * s.powf(self.exponent()) * (1.0 - s) / config.ratio()
    }

    /// Derivative of efficiency with respect to cost along the frontier.
    pub fn budget_slope(&self, s: f64, config: &ContestConfig) -> f64 {
        let e = self.exponent();
        (e - (e + 1.0) * s) / (config.ratio() * self.alpha)
    }
}

/// Interior optimum of the relaxed problem and its projection onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxedStar {
    pub raw: f64,
    pub clamped: f64,
}

/// `s = (eps + 1 - (m/n) lambda) alpha / ((eps + 1) alpha + 1)`, the maximiser
/// of `eta - lambda C` when every cutoff is feasible.
pub fn s_star_relaxed(family: &PowerFamily, config: &ContestConfig) -> RelaxedStar {
    let raw = (family.eps + 1.0 - config.ratio() * config.lambda) * family.alpha / (family.exponent() + 1.0);
    RelaxedStar { raw, clamped: raw.clamp(0.0, 1.0) }
}

/// Largest cutoff a single-prize contest can induce: the root of
/// `gamma s^(alpha eps) - (m/n) sum_{k=0}^{n-2} (1 - s^alpha)^k`, clamped to `[0, 1]`.
pub fn s_max_single_prize(family: &PowerFamily, config: &ContestConfig) -> Result<f64> {
    if config.m != 1 {
        return Err(Error::invalid("m", "the single-prize bound needs m = 1"));
    }
    let ratio = config.ratio();
    let n = config.n;
    let g = |s: f64| {
        let q = 1.0 - s.powf(family.alpha);
        let tail: f64 = (0..=n - 2).map(|k| q.powi(k as i32)).sum();
        family.gamma * s.powf(family.alpha * family.eps) - ratio * tail
    };
    if g(0.0) >= 0.0 {
        return Ok(0.0);
    }
    if g(1.0) <= 0.0 {
        return Ok(1.0);
    }
    Ok(bisect(g, 0.0, 1.0, 0.0))
}

/// Optimal feasible cutoff of a single-prize contest: the relaxed optimum
/// projected onto `[0, s_max]`.
pub fn s_star_constrained(family: &PowerFamily, config: &ContestConfig) -> Result<f64> {
    let s_max = s_max_single_prize(family, config)?;
    Ok(s_star_relaxed(family, config).raw.clamp(0.0, s_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    Gamma,
    Eps,
    Lambda,
    /// Number of prizes at fixed `n`.
    M,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Gamma => "gamma",
            Self::Eps => "eps",
            Self::Lambda => "lambda",
            Self::M => "m",
        }
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "alpha" => Self::Alpha,
            "gamma" => Self::Gamma,
            "eps" | "epsilon" => Self::Eps,
            "lambda" => Self::Lambda,
            "m" => Self::M,
            other => return Err(Error::invalid("over", format!("unknown parameter `{other}`"))),
        })
    }
}

/// Grid for one swept parameter, written `name:lo:hi[:points]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRange {
    pub parameter: SweepParameter,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

pub const DEFAULT_SWEEP_POINTS: usize = 33;

impl SweepRange {
    pub fn new(parameter: SweepParameter, lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid("over", "bounds must be finite with lo <= hi"));
        }
        if points == 0 {
            return Err(Error::invalid("over", "needs at least one point"));
        }
        let positive = matches!(parameter, SweepParameter::Alpha | SweepParameter::Gamma | SweepParameter::Eps);
        if positive && lo <= 0.0 {
            return Err(Error::invalid("over", format!("{} must be positive", parameter.name())));
        }
        Ok(Self { parameter, lo, hi, points })
    }

    /// Grid values; log-spaced for `gamma`, the integers in `[lo, hi]` for `m`.
    pub fn values(&self) -> Vec<f64> {
        let k = self.points;
        let at = |i: usize| if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
        match self.parameter {
            SweepParameter::M => (self.lo.ceil() as usize..=self.hi.floor() as usize).map(|m| m as f64).collect(),
            SweepParameter::Gamma => {
                let (a, b) = (self.lo.ln(), self.hi.ln());
                (0..k).map(|i| (a + (b - a) * at(i)).exp()).collect()
            }
            _ => (0..k).map(|i| self.lo + (self.hi - self.lo) * at(i)).collect(),
        }
    }
}

impl FromStr for SweepRange {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(Error::invalid("over", "expected name:lo:hi[:points]"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::invalid("over", format!("`{s}` is not a number")));
        let points = match parts.get(3) {
            Some(p) => p.trim().parse().map_err(|_| Error::invalid("over", format!("`{p}` is not a count")))?,
            None => DEFAULT_SWEEP_POINTS,
        };
        Self::new(parts[0].trim().parse()?, num(parts[1])?, num(parts[2])?, points)
    }
}

/// Shape of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Constant,
    Increasing,
    Decreasing,
    NonDecreasing,
    NonIncreasing,
    Mixed,
}

impl Monotonicity {
    pub fn of(values: &[f64], tol: f64) -> Self {
        let mut up = false;
        let mut down = false;
        let mut flat = false;
        for w in values.windows(2) {
            let d = w[1] - w[0];
            if d > tol {
                up = true;
            } else if d < -tol {
                down = true;
            } else {
                flat = true;
            }
        }
        match (up, down, flat) {
            (true, true, _) => Self::Mixed,
            (true, false, false) => Self::Increasing,
            (true, false, true) => Self::NonDecreasing,
            (false, true, false) => Self::Decreasing,
            (false, true, true) => Self::NonIncreasing,
            (false, false, _) => Self::Constant,
        }
    }

    /// Whether `self` is consistent with the claim `expected`.
    pub fn satisfies(self, expected: Self) -> bool {
        use Monotonicity::*;
        match expected {
            NonDecreasing => matches!(self, Constant | Increasing | NonDecreasing),
            NonIncreasing => matches!(self, Constant | Decreasing | NonIncreasing),
            other => self == other,
        }
    }
}

impl fmt::Display for Monotonicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Self::Constant => "constant",
            Self::Increasing => "increasing",
            Self::Decreasing => "decreasing",
            Self::NonDecreasing => "non_decreasing",
            Self::NonIncreasing => "non_increasing",
            Self::Mixed => "mixed",
        };
        f.write_str(text)
    }
}

/// Predicted shape of the relaxed optimum as `parameter` grows.
pub fn expected_shape(parameter: SweepParameter, family: &PowerFamily, config: &ContestConfig) -> Monotonicity {
    match parameter {
        SweepParameter::Lambda | SweepParameter::M => Monotonicity::Decreasing,
        SweepParameter::Eps => Monotonicity::Increasing,
        SweepParameter::Gamma => Monotonicity::Constant,
        SweepParameter::Alpha => {
            let margin = family.eps + 1.0 - config.ratio() * config.lambda;
            if margin > 0.0 {
                Monotonicity::Increasing
            } else if margin < 0.0 {
                Monotonicity::Decreasing
            } else {
                Monotonicity::Constant
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub eps: f64,
    pub lambda: f64,
    pub n: usize,
    pub m: usize,
    pub s_star_raw: f64,
    pub s_star: f64,
    /// Single-prize bound; `None` when `m > 1`.
    pub s_max: Option<f64>,
    /// Optimal cutoff used for the outcome columns: the projection onto
    /// `[0, s_max]` when `m = 1`, otherwise the clamped relaxed optimum.
    pub s_opt: f64,
    pub cost: f64,
    pub eta: f64,
    pub payoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    /// Observed shape of the raw relaxed optimum.
    pub observed: Monotonicity,
    /// Shape predicted by the closed form at the base point.
    pub expected: Monotonicity,
    pub matches: bool,
    /// First grid value at which `s_opt` stops rising and starts falling.
    pub turning_point: Option<f64>,
}

const SHAPE_TOL: f64 = 1e-12;

/// Tabulates relaxed and constrained optima over `range`, holding the other
/// parameters at `family` and `config`.
pub fn sweep(family: &PowerFamily, config: &ContestConfig, range: &SweepRange) -> Result<SweepTable> {
    config.validate()?;
    let mut rows = Vec::new();
    for value in range.values() {
        let mut fam = *family;
        let mut cfg = *config;
        match range.parameter {
            SweepParameter::Alpha => fam.alpha = value,
            SweepParameter::Gamma => fam.gamma = value,
            SweepParameter::Eps => fam.eps = value,
            SweepParameter::Lambda => cfg.lambda = value,
            SweepParameter::M => cfg.m = value as usize,
        }
        let fam = PowerFamily::new(fam.alpha, fam.gamma, fam.eps)?;
        cfg.validate()?;
        let star = s_star_relaxed(&fam, &cfg);
        let s_max = if cfg.m == 1 { Some(s_max_single_prize(&fam, &cfg)?) } else { None };
        let s_opt = s_max.map_or(star.clamped, |hi| star.raw.clamp(0.0, hi));
        let cost = fam.cost(s_opt);
        let eta = fam.efficiency(s_opt, &cfg);
        rows.push(SweepRow {
            value,
            alpha: fam.alpha,
            gamma: fam.gamma,
            eps: fam.eps,
            lambda: cfg.lambda,
            n: cfg.n,
            m: cfg.m,
            s_star_raw: star.raw,
            s_star: star.clamped,
            s_max,
            s_opt,
            cost,
            eta,
            payoff: eta - cfg.lambda * cost,
        });
    }
    let raw: Vec<f64> = rows.iter().map(|r| r.s_star_raw).collect();
    let observed = Monotonicity::of(&raw, SHAPE_TOL);
    let expected = expected_shape(range.parameter, family, config);
    let opt: Vec<f64> = rows.iter().map(|r| r.s_opt).collect();
    let turning_point = opt
        .windows(3)
        .position(|w| w[1] - w[0] > SHAPE_TOL && w[2] - w[1] < -SHAPE_TOL)
        .map(|i| rows[i + 1].value);
    Ok(SweepTable { parameter: range.parameter, rows, observed, matches: observed.satisfies(expected), expected, turning_point })
}
