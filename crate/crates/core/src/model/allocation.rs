use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::ContestConfig;
use crate::error::{Error, Result};
use crate::numeric::binomial;

const BOUND_TOL: f64 = 1e-12;

/// Symmetric mechanism in reduced form: component `k` (1-based) is the total
/// expected prize mass given to the high-effort group when exactly `k` agents
/// exert high effort. `v_0 = 0` and `v_n = m` are implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationVector {
    n: usize,
    m: usize,
    v: Vec<f64>,
}

impl AllocationVector {
    /// Builds a vector after checking its length and `0 <= v_k <= m`. The
    /// tighter per-agent bounds are reported by [`Self::is_compliant`].
    pub fn new(config: &ContestConfig, v: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if v.len() != config.n - 1 {
            return Err(Error::invalid("v", format!("expected {} components, got {}", config.n - 1, v.len())));
        }
        let m = config.m as f64;
        for (i, &x) in v.iter().enumerate() {
            if !x.is_finite() || x < -BOUND_TOL || x > m + BOUND_TOL {
                return Err(Error::invalid(format!("v[{i}]"), format!("{x} outside [0, {m}]")));
            }
        }
        let v = v.into_iter().map(|x| x.clamp(0.0, m)).collect();
        Ok(Self { n: config.n, m: config.m, v })
    }

    /// Parses a comma separated list such as `"1,2"`.
    pub fn parse(config: &ContestConfig, text: &str) -> Result<Self> {
        let v = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .enumerate()
            .map(|(i, s)| {
                s.parse::<f64>()
                    .map_err(|e| Error::invalid(format!("v[{i}]"), format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(config, v)
    }

    /// Standard contest: high-effort agents are selected first.
    pub fn standard(config: &ContestConfig) -> Self {
        Self::from_fn(config, |k| Self::upper_bound_of(config, k))
    }

    /// Reversed contest: low-effort agents are selected first.
    pub fn reversed(config: &ContestConfig) -> Self {
        Self::from_fn(config, |k| Self::lower_bound_of(config, k))
    }

    /// Uniform lottery that ignores effort.
    pub fn random(config: &ContestConfig) -> Self {
        Self::from_fn(config, |k| k as f64 * config.m as f64 / config.n as f64)
    }

    /// Componentwise `(1 - t) * a + t * b`.
    pub fn lerp(a: &Self, b: &Self, t: f64) -> Self {
        debug_assert_eq!((a.n, a.m), (b.n, b.m));
        let v = a.v.iter().zip(&b.v).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        Self { n: a.n, m: a.m, v }
    }

    fn from_fn(config: &ContestConfig, f: impl Fn(usize) -> f64) -> Self {
        Self {
            n: config.n,
            m: config.m,
            v: (1..config.n).map(f).collect(),
        }
    }

    fn upper_bound_of(config: &ContestConfig, k: usize) -> f64 {
        k.min(config.m) as f64
    }

    fn lower_bound_of(config: &ContestConfig, k: usize) -> f64 {
        (config.m + k).saturating_sub(config.n) as f64
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The `n - 1` free components `v_1, ..., v_{n-1}`.
    pub fn components(&self) -> &[f64] {
        &self.v
    }

    /// `v_k` for `k` in `0..=n`, including the implicit endpoints.
    pub fn total(&self, k: usize) -> f64 {
        match k {
            0 => 0.0,
            k if k == self.n => self.m as f64,
            k => self.v[k - 1],
        }
    }

    /// Smallest admissible `v_k` under the unit per-agent bound.
    pub fn lower_bound(&self, k: usize) -> f64 {
        (self.m + k).saturating_sub(self.n) as f64
    }

    /// Largest admissible `v_k` under the unit per-agent bound.
    pub fn upper_bound(&self, k: usize) -> f64 {
        k.min(self.m) as f64
    }

    /// First component (1-based) violating `max(0, m-(n-k)) <= v_k <= min(k, m)`.
    pub fn bound_violation(&self) -> Option<usize> {
        (1..self.n).find(|&k| {
            let x = self.total(k);
            x < self.lower_bound(k) - BOUND_TOL || x > self.upper_bound(k) + BOUND_TOL
        })
    }

    pub fn is_compliant(&self) -> bool {
        self.bound_violation().is_none()
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.v.iter().zip(&other.v).all(|(a, b)| *a <= *b + BOUND_TOL)
    }
}

impl fmt::Display for AllocationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.v.iter().map(|x| format!("{x}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Which mechanism a one-parameter family starts from at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyStart {
    Reversed,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
enum FamilyKind {
    Quota { relaxed: bool },
    BlindEye,
    Segment { from: AllocationVector, to: AllocationVector },
}

/// Continuous map `t in [0, 1] -> AllocationVector` ending at the standard
/// contest.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismFamily {
    config: ContestConfig,
    kind: FamilyKind,
}

impl MechanismFamily {
    /// Quota mechanisms: the high-effort group wins the prize with
    /// probability `t`. Needs `m = 1`; with `relaxed` and `m >= 2` the
    /// per-agent bound is dropped and the group receives `t * m`.
    pub fn quota(config: &ContestConfig, relaxed: bool) -> Result<Self> {
        config.validate()?;
        if config.m != 1 && !relaxed {
            return Err(Error::invalid(
                "family",
                format!("quota mechanisms need m = 1 (got m = {}) unless the per-agent bound is relaxed", config.m),
            ));
        }
        Ok(Self { config: *config, kind: FamilyKind::Quota { relaxed } })
    }

    /// Blind-eye mechanisms: high effort is observed with probability `t`,
    /// then a standard contest runs on the observed profile.
    pub fn blind_eye(config: &ContestConfig) -> Self {
        Self { config: *config, kind: FamilyKind::BlindEye }
    }

    /// Straight line from the random lottery to the standard contest.
    pub fn random_to_standard(config: &ContestConfig) -> Self {
        Self {
            config: *config,
            kind: FamilyKind::Segment {
                from: AllocationVector::random(config),
                to: AllocationVector::standard(config),
            },
        }
    }

    pub fn config(&self) -> &ContestConfig {
        &self.config
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::Quota { .. } => "quota",
            FamilyKind::BlindEye => "blind",
            FamilyKind::Segment { .. } => "segment",
        }
    }

    pub fn start(&self) -> FamilyStart {
        match self.kind {
            FamilyKind::Quota { .. } => FamilyStart::Reversed,
            FamilyKind::BlindEye | FamilyKind::Segment { .. } => FamilyStart::Random,
        }
    }

    pub fn is_relaxed_quota(&self) -> bool {
        matches!(self.kind, FamilyKind::Quota { relaxed: true })
    }

    pub fn at(&self, t: f64) -> AllocationVector {
        let t = t.clamp(0.0, 1.0);
        let cfg = &self.config;
        match &self.kind {
            FamilyKind::Quota { .. } => {
                let mass = t * cfg.m as f64;
                AllocationVector { n: cfg.n, m: cfg.m, v: vec![mass; cfg.n - 1] }
            }
            FamilyKind::BlindEye => AllocationVector::from_fn(cfg, |k| blind_eye_total(cfg, k, t)),
            FamilyKind::Segment { from, to } => AllocationVector::lerp(from, to, t),
        }
    }
}

/// Expected prize mass reaching the `k` truly high-effort agents when each is
/// seen as high with probability `t` and a standard contest is run on what is
/// seen.
fn blind_eye_total(cfg: &ContestConfig, k: usize, t: f64) -> f64 {
    let (n, m) = (cfg.n, cfg.m);
    (0..=k)
        .map(|j| {
            let p = binomial(k, j) * t.powi(j as i32) * (1.0 - t).powi((k - j) as i32);
            // j observed high take min(j, m); the rest is shared evenly by the
            // n - j agents observed low, k - j of whom actually worked.
            let top = j.min(m) as f64;
            let rest = (m as f64 - top) * (k - j) as f64 / (n - j) as f64;
            p * (top + rest)
        })
        .sum()
}
