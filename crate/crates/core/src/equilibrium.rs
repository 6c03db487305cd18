//! Interim allocations, the marginal-type incentive `phi`, and symmetric
//! equilibrium cutoffs of a mechanism.
//!
//! With every opponent playing cutoff `s`, each of them exerts high effort
//! independently with probability `p = F(s)`. An agent who works then faces
//! `Q_H = E[v_{K+1} / (K+1)]` and one who shirks faces
//! `Q_L = E[(m - v_K) / (n - K)]` with `K ~ Bin(n - 1, p)`, and
//! `phi(s, v) = Q_H - c(s) - Q_L`.

use serde::{Deserialize, Serialize};

use crate::model::{AllocationVector, Instance};
use crate::numeric::{binomial, scan_roots};

/// Grid and tolerance knobs for cutoff searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Number of uniform cells on `[0, 1]` scanned for sign changes.
    pub grid: usize,
    /// Bisection tolerance on `s`.
    pub root_tol: f64,
    /// Tolerance on `phi` when classifying boundary equilibria and tangencies.
    pub class_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { grid: 2048, root_tol: 1e-10, class_tol: 1e-9 }
    }
}

/// Selection probabilities of a single agent, by own action, when everyone
/// else plays the same cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterimAllocation {
    pub q_high: f64,
    pub q_low: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    Interior,
    BoundaryZero,
    BoundaryOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumCutoff {
    pub s: f64,
    pub kind: CutoffKind,
}

/// All symmetric equilibrium cutoffs of one mechanism, ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibria {
    pub equilibria: Vec<EquilibriumCutoff>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Equilibria {
    pub fn cutoffs(&self) -> Vec<f64> {
        self.equilibria.iter().map(|e| e.s).collect()
    }
}

/// Binomial weights `P(K = k)` for `K ~ Bin(trials, p)`.
fn binomial_pmf(trials: usize, p: f64) -> Vec<f64> {
    (0..=trials)
        .map(|k| binomial(trials, k) * p.powi(k as i32) * (1.0 - p).powi((trials - k) as i32))
        .collect()
}

pub fn interim_allocation(v: &AllocationVector, s: f64, inst: &Instance) -> InterimAllocation {
    let n = inst.config.n;
    let m = inst.config.m as f64;
    let p = inst.dist.cdf(s);
    let pmf = binomial_pmf(n - 1, p);
    let mut q_high = 0.0;
    let mut q_low = 0.0;
    for (k, w) in pmf.iter().enumerate() {
        q_high += w * v.total(k + 1) / (k + 1) as f64;
        q_low += w * (m - v.total(k)) / (n - k) as f64;
    }
    InterimAllocation { q_high, q_low }
}

/// Payoff gap of the marginal type `s` between high and low effort when all
/// opponents play cutoff `s`.
pub fn phi(s: f64, v: &AllocationVector, inst: &Instance) -> f64 {
    let n = inst.config.n;
    let m = inst.config.m as f64;
    let p = inst.dist.cdf(s);
    let q = 1.0 - p;
    let mut gain = 0.0;
    for k in 1..n {
        gain += p.powi(k as i32 - 1) * q.powi((n - 1 - k) as i32) * binomial(n, k) * v.total(k);
    }
    let geometric: f64 = (0..=n - 2).map(|k| p.powi(k as i32)).sum();
    gain / n as f64 - inst.cost.value(s) - m / n as f64 * geometric
}

/// Every symmetric equilibrium cutoff of `v`: interior zeros of `phi`
/// (including tangential ones) plus the boundary cutoffs `0` when
/// `phi(0) <= tol` and `1` when `phi(1) >= -tol`.
pub fn find_equilibria(v: &AllocationVector, inst: &Instance, opts: &ScanOptions) -> Equilibria {
    let f = |s: f64| phi(s, v, inst);
    let mut equilibria = Vec::new();
    let mut warnings = Vec::new();

    if f(0.0) <= opts.class_tol {
        equilibria.push(EquilibriumCutoff { s: 0.0, kind: CutoffKind::BoundaryZero });
    }
    let roots = scan_roots(f, 0.0, 1.0, opts.grid, opts.root_tol, opts.class_tol);
    let step = 1.0 / opts.grid as f64;
    let mut last: Option<f64> = None;
    for r in roots {
        if r.x <= opts.root_tol || r.x >= 1.0 - opts.root_tol {
            continue;
        }
        if let Some(prev) = last {
            if r.x - prev <= opts.root_tol {
                continue;
            }
            if r.x - prev < step {
                warnings.push(format!(
                    "roots {prev} and {} are closer than the scan step {step}; refine the grid",
                    r.x
                ));
            }
        }
        last = Some(r.x);
        equilibria.push(EquilibriumCutoff { s: r.x, kind: CutoffKind::Interior });
    }
    if f(1.0) >= -opts.class_tol {
        equilibria.push(EquilibriumCutoff { s: 1.0, kind: CutoffKind::BoundaryOne });
    }
    if equilibria.is_empty() {
        warnings.push("no equilibrium found; phi may be discontinuous".to_string());
    }
    Equilibria { equilibria, warnings }
}

/// Checks that, with opponents at cutoff `s`, every probe type weakly prefers
/// the action the cutoff prescribes (high effort iff `theta < s`; at `s = 1`
/// every type works). Payoff differences within `1e-9` count as
/// indifference.
pub fn best_response_check(v: &AllocationVector, s: f64, inst: &Instance, types: &[f64]) -> bool {
    const TOL: f64 = 1e-9;
    let q = interim_allocation(v, s, inst);
    types.iter().all(|&theta| {
        let high = q.q_high - inst.cost.value(theta);
        let low = q.q_low;
        if theta < s || s >= 1.0 {
            high >= low - TOL
        } else {
            low >= high - TOL
        }
    })
}
