//! The principal's problem `max eta - lambda * C` over feasible cutoffs.
//!
//! Infeasible costs are pushed down to zero efficiency, the resulting point
//! set is replaced by its least concave majorant, and the optimal cost is the
//! point where the majorant's slope crosses `lambda`. Hull vertices are always
//! attainable points of the restricted frontier.

use serde::Serialize;

use crate::equilibrium::ScanOptions;
use crate::error::{Error, Result};
use crate::feasible::{feasible_set_default, synthesize_mechanism, FeasibleSet};
use crate::model::{Instance, MechanismFamily};
use crate::numeric::golden_max;
use crate::outcome::{FrontierCurve, FrontierSource};

const MEMBER_TOL: f64 = 1e-12;

/// Frontier sample with its feasibility-restricted efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestrictedPoint {
    pub s: f64,
    pub cost: f64,
    pub eta: f64,
    /// `eta` when `s` is feasible, otherwise 0.
    pub eta0: f64,
    pub feasible: bool,
}

pub fn restrict_eta(frontier: &FrontierCurve, feasible: &FeasibleSet) -> Vec<RestrictedPoint> {
    frontier
        .points
        .iter()
        .map(|p| {
            let ok = feasible.contains(p.s, MEMBER_TOL);
            RestrictedPoint { s: p.s, cost: p.cost, eta: p.eta, eta0: if ok { p.eta } else { 0.0 }, feasible: ok }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HullVertex {
    pub cost: f64,
    pub eta: f64,
    /// Cutoff of the frontier sample this vertex came from.
    pub s: f64,
}

/// Upper concave envelope of the restricted frontier, as a polyline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcaveEnvelope {
    pub vertices: Vec<HullVertex>,
    /// `slopes[i]` is the slope between `vertices[i]` and `vertices[i + 1]`;
    /// strictly decreasing.
    pub slopes: Vec<f64>,
}

impl ConcaveEnvelope {
    /// Envelope value at `cost`, or `None` outside `[0, C_max]`.
    pub fn value(&self, cost: f64) -> Option<f64> {
        let first = self.vertices.first()?;
        let last = self.vertices.last()?;
        if cost < first.cost || cost > last.cost {
            return None;
        }
        let i = self.vertices.partition_point(|v| v.cost < cost);
        if i == 0 || self.vertices[i].cost == cost {
            return Some(self.vertices[i].eta);
        }
        let a = self.vertices[i - 1];
        Some(a.eta + self.slopes[i - 1] * (cost - a.cost))
    }

    pub fn max_cost(&self) -> f64 {
        self.vertices.last().map_or(0.0, |v| v.cost)
    }

    /// `max_C envelope(C) - lambda C`, attained at a vertex.
    pub fn max_payoff(&self, lambda: f64) -> f64 {
        self.vertices.iter().map(|v| v.eta - lambda * v.cost).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Upper hull (monotone chain) of `{(cost, eta0)} ∪ {(0, 0)}`. Collinear
/// interior points are dropped so slopes strictly decrease.
pub fn concavify(points: &[RestrictedPoint]) -> ConcaveEnvelope {
    let mut pts: Vec<HullVertex> = points.iter().map(|p| HullVertex { cost: p.cost, eta: p.eta0, s: p.s }).collect();
    if !pts.iter().any(|p| p.cost == 0.0 && p.eta >= 0.0) {
        pts.push(HullVertex { cost: 0.0, eta: 0.0, s: 0.0 });
    }
    pts.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(b.eta.total_cmp(&a.eta)));
    pts.dedup_by(|b, a| a.cost == b.cost);

    let mut hull: Vec<HullVertex> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // Drop b unless it lies strictly above the chord a -> p.
            let cross = (b.cost - a.cost) * (p.eta - a.eta) - (b.eta - a.eta) * (p.cost - a.cost);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let slopes = hull.windows(2).map(|w| (w[1].eta - w[0].eta) / (w[1].cost - w[0].cost)).collect();
    ConcaveEnvelope { vertices: hull, slopes }
}

/// Inverse of the envelope's derivative at `lambda`: the first vertex whose
/// right-hand slope is `<= lambda`. A slope equal to `lambda` resolves to the
/// lower-cost end of that segment; `lambda` below every slope gives the last
/// vertex. Returns the vertex index.
pub fn inverse_derivative(envelope: &ConcaveEnvelope, lambda: f64) -> usize {
    envelope.slopes.iter().position(|&slope| slope <= lambda).unwrap_or(envelope.vertices.len().saturating_sub(1))
}

/// Sampling knobs for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub frontier_grid: usize,
    pub scan: ScanOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { frontier_grid: 4096, scan: ScanOptions::default() }
    }
}

/// Implementation hint attached to a solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismHint {
    pub family: String,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSolution {
    #[serde(rename = "C_star")]
    pub cost: f64,
    pub s_star: f64,
    pub eta: f64,
    pub payoff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismHint>,
    #[serde(skip)]
    pub envelope: ConcaveEnvelope,
    #[serde(skip)]
    pub restricted: Vec<RestrictedPoint>,
}

impl OptimalSolution {
    /// Envelope minus restricted efficiency at the returned cost.
    pub fn envelope_gap(&self) -> f64 {
        self.envelope.value(self.cost).map_or(f64::INFINITY, |e| e - self.eta)
    }
}

/// Samples inserted on each side of every hull vertex before the final hull.
const VERTEX_REFINE: usize = 8;

/// Optimal cutoff for a generic frontier restricted to `feasible`.
pub fn solve_frontier<S: FrontierSource + ?Sized>(
    source: &S,
    feasible: &FeasibleSet,
    lambda: f64,
    grid: usize,
) -> Result<OptimalSolution> {
    if !lambda.is_finite() {
        return Err(Error::invalid("lambda", "must be finite"));
    }
    let mut frontier = FrontierCurve::build(source, grid, &feasible.endpoints())?;

    // Densify around the vertices of a first hull.
    let hull = concavify(&restrict_eta(&frontier, feasible));
    let mut extra = Vec::new();
    for v in &hull.vertices {
        let j = frontier.points.partition_point(|p| p.s < v.s);
        for nb in [j.checked_sub(1), Some(j + 1)].into_iter().flatten() {
            if let Some(p) = frontier.points.get(nb) {
                let (a, b) = (v.s.min(p.s), v.s.max(p.s));
                extra.extend((1..=VERTEX_REFINE).map(|k| a + (b - a) * k as f64 / (VERTEX_REFINE + 1) as f64));
            }
        }
    }
    frontier.insert(source, &extra)?;

    let restricted = restrict_eta(&frontier, feasible);
    let envelope = concavify(&restricted);
    let mut vertex = envelope.vertices[inverse_derivative(&envelope, lambda)];
    if !feasible.contains(vertex.s, MEMBER_TOL) {
        // Only possible for lambda <= 0, where the hull can end on an
        // infeasible zero-efficiency sample; use the best feasible sample.
        let p = restricted
            .iter()
            .filter(|p| p.feasible)
            .max_by(|a, b| (a.eta - lambda * a.cost).total_cmp(&(b.eta - lambda * b.cost)))
            .ok_or_else(|| Error::Numerical("no feasible frontier sample".into()))?;
        vertex = HullVertex { cost: p.cost, eta: p.eta, s: p.s };
    }

    // Polish inside the neighbouring cells that belong to the same feasible
    // interval as the vertex.
    let payoff = |s: f64| source.efficiency(s) - lambda * source.cost(s);
    let mut best_s = vertex.s;
    if let Some(&[a, b]) = feasible.intervals.iter().find(|iv| vertex.s >= iv[0] - MEMBER_TOL && vertex.s <= iv[1] + MEMBER_TOL) {
        let j = frontier.points.partition_point(|p| p.s < vertex.s);
        let lo = j.checked_sub(1).map_or(vertex.s, |i| frontier.points[i].s).max(a);
        let hi = frontier.points.get(j + 1).map_or(vertex.s, |p| p.s).min(b);
        if hi > lo {
            let (s, y) = golden_max(payoff, lo, hi, 1e-13);
            if y > payoff(vertex.s) {
                best_s = s;
            }
        }
    }

    if best_s != vertex.s {
        frontier.insert(source, &[best_s])?;
    }
    let restricted = restrict_eta(&frontier, feasible);
    let envelope = concavify(&restricted);
    // Report the stored sample so the solution agrees with the envelope.
    let chosen = restricted[restricted.partition_point(|p| p.s < best_s)];

    Ok(OptimalSolution {
        cost: chosen.cost,
        s_star: chosen.s,
        eta: chosen.eta0,
        payoff: chosen.eta0 - lambda * chosen.cost,
        mechanism: None,
        envelope,
        restricted,
    })
}

/// Solves the principal's problem for a contest instance, optionally
/// attaching a parameter of `family` that implements the optimal cutoff.
pub fn solve(inst: &Instance, family: Option<&MechanismFamily>, opts: &OptimizeOptions) -> Result<OptimalSolution> {
    let feasible = feasible_set_default(inst, &opts.scan);
    let mut sol = solve_frontier(inst, &feasible, inst.config.lambda, opts.frontier_grid)?;
    if let Some(fam) = family {
        let t = synthesize_mechanism(sol.s_star, fam, inst, &opts.scan)?;
        sol.mechanism = Some(MechanismHint { family: fam.name().to_string(), t });
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::CostParametrized;

    fn quintic(c: f64) -> f64 {
        16.0 * c.powi(5) - 55.0 * c.powi(4) + 63.0 * c.powi(3) - 30.0 * c.powi(2) + 6.0 * c
    }

    fn gap_set() -> FeasibleSet {
        FeasibleSet { intervals: vec![[0.0, 0.05], [0.15, 1.0]] }
    }

    fn point(cost: f64, eta: f64) -> RestrictedPoint {
        RestrictedPoint { s: cost, cost, eta, eta0: eta, feasible: true }
    }

    #[test]
    fn restriction_zeroes_gap() {
        let src = CostParametrized(quintic);
        let frontier = FrontierCurve::build(&src, 101, &[0.05, 0.15]).unwrap();
        for p in restrict_eta(&frontier, &gap_set()) {
            let inside = p.cost > 0.05 + 1e-12 && p.cost < 0.15 - 1e-12;
            assert_eq!(p.feasible, !inside);
            assert_eq!(p.eta0, if inside { 0.0 } else { p.eta });
        }
        let only_zero = restrict_eta(&frontier, &FeasibleSet::singleton(0.0));
        assert!(only_zero.iter().all(|p| p.eta0 == 0.0));
        let all = restrict_eta(&frontier, &FeasibleSet::full());
        assert!(all.iter().all(|p| p.eta0 == p.eta));
    }

    #[test]
    fn quintic_bridges() {
        let src = CostParametrized(quintic);
        let sol = solve_frontier(&src, &gap_set(), 1.0, 4096).unwrap();
        let env = &sol.envelope;
        let bridge = env.vertices.iter().position(|v| (v.cost - 0.05).abs() < 1e-12).unwrap();
        assert!((env.vertices[bridge + 1].cost - 0.15).abs() < 1e-12);
        assert!((env.slopes[bridge] - 1.7846).abs() < 1e-9);
        let (i, wide) = env
            .slopes
            .iter()
            .enumerate()
            .map(|(i, _)| (i, env.vertices[i + 1].cost - env.vertices[i].cost))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(wide > 0.5);
        assert!((env.vertices[i].cost - 0.164229).abs() < 1e-3);
        assert!((env.vertices[i + 1].cost - 0.703326).abs() < 1e-3);
        assert!((env.slopes[i] - 0.32752).abs() < 1e-4);
    }

    #[test]
    fn inverse_derivative_conventions() {
        let src = CostParametrized(quintic);
        let sol = solve_frontier(&src, &gap_set(), 1.0, 4096).unwrap();
        let env = &sol.envelope;
        assert_eq!(inverse_derivative(env, 6.0), 0);
        assert_eq!(inverse_derivative(env, 100.0), 0);
        let k = inverse_derivative(env, 1.7846);
        assert!((env.vertices[k].cost - 0.05).abs() < 1e-12);
        let flat = env.slopes.iter().position(|s| (s - 0.32752).abs() < 1e-4).unwrap();
        let k = inverse_derivative(env, env.slopes[flat]);
        assert!((env.vertices[k].cost - 0.164229).abs() < 1e-3);
        // Non-increasing in lambda.
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let c = env.vertices[inverse_derivative(env, -1.0 + 0.05 * i as f64)].cost;
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn concave_input_is_its_own_envelope() {
        let pts: Vec<RestrictedPoint> = (0..=50).map(|i| {
            let c = i as f64 / 50.0;
            point(c, c * (1.3 - c))
        }).collect();
        let env = concavify(&pts);
        assert_eq!(env.vertices.len(), pts.len());
        for w in env.slopes.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn envelope_matches_pairwise_mixtures() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 40;
            let mut pts: Vec<RestrictedPoint> = (0..n)
                .map(|i| point(i as f64 / (n - 1) as f64, rng.random::<f64>() - 0.2))
                .collect();
            pts[0].eta0 = 0.0;
            let env = concavify(&pts);
            for p in &pts {
                let mut best = f64::NEG_INFINITY;
                for a in &pts {
                    for b in &pts {
                        if a.cost <= p.cost && b.cost >= p.cost {
                            let w = if b.cost == a.cost { 1.0 } else { (b.cost - p.cost) / (b.cost - a.cost) };
                            best = best.max(w * a.eta0 + (1.0 - w) * b.eta0);
                        }
                    }
                }
                assert!((env.value(p.cost).unwrap() - best).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cost_loving_principal_stays_feasible() {
        let inst = Instance::two_interval_example();
        let feasible = feasible_set_default(&inst, &ScanOptions::default());
        for lambda in [0.0, -0.5, -5.0] {
            let mut inst = inst.clone();
            inst.config.lambda = lambda;
            let sol = solve(&inst, None, &OptimizeOptions::default()).unwrap();
            assert!(feasible.contains(sol.s_star, 1e-12), "lambda={lambda}: {}", sol.s_star);
        }
    }

    #[test]
    fn cost_dominated_principal_picks_zero() {
        let inst = Instance::power_family(3, 1, 1e6, 1.0, 0.5, 1.0).unwrap();
        let sol = solve(&inst, None, &OptimizeOptions::default()).unwrap();
        assert_eq!(sol.s_star, 0.0);
        assert_eq!(sol.payoff, 0.0);
    }

    #[test]
    fn power_family_interior_matches_closed_form() {
        // n=4, m=1, lambda=2, alpha=1, eps=1, gamma small enough that [0,1] is feasible
        let inst = Instance::power_family(4, 1, 2.0, 1.0, 0.2, 1.0).unwrap();
        let sol = solve(&inst, Some(&MechanismFamily::quota(&inst.config, false).unwrap()), &OptimizeOptions::default()).unwrap();
        let expect = (2.0 - 0.25 * 2.0) / 3.0;
        assert!((sol.s_star - expect).abs() < 1e-6, "{} vs {expect}", sol.s_star);
        assert!(sol.mechanism.is_some());
        assert!(sol.envelope_gap().abs() < 1e-12);
    }

    #[test]
    fn gap_instance_picks_best_endpoint() {
        let inst = Instance::two_interval_example();
        let feasible = feasible_set_default(&inst, &ScanOptions::default());
        let (s1, s2) = (feasible.intervals[0][1], feasible.intervals[1][0]);
        let payoff = |s: f64, lambda: f64| inst.efficiency(s) - lambda * inst.cost(s);
        // Pick lambda so the unconstrained optimum falls inside the gap.
        let mut hit = false;
        for i in 0..60 {
            let lambda = 0.05 * i as f64;
            let mut inst_l = inst.clone();
            inst_l.config.lambda = lambda;
            let (s0, _) = golden_max(|s| payoff(s, lambda), 0.0, 1.0, 1e-12);
            if s0 > s1 + 1e-3 && s0 < s2 - 1e-3 {
                hit = true;
                let sol = solve(&inst_l, None, &OptimizeOptions::default()).unwrap();
                let best = if payoff(s1, lambda) >= payoff(s2, lambda) { s1 } else { s2 };
                assert!((sol.s_star - best).abs() < 1e-9, "lambda={lambda}: {} vs {best}", sol.s_star);
            }
        }
        assert!(hit);
    }
}
