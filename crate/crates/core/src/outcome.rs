//! Societal cost and selection efficiency as functions of the equilibrium
//! cutoff, the cost-efficiency frontier and its slope.

use serde::Serialize;

use crate::equilibrium::interim_allocation;
use crate::error::{Error, Result};
use crate::model::{AllocationVector, Instance};
use crate::numeric::bisect;

/// Below this cutoff a `0/0` elasticity is replaced by its value here.
const ELASTICITY_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomePair {
    /// Expected per-agent effort cost.
    pub cost: f64,
    /// Selection efficiency; 0 for a pure lottery, 1 for always picking
    /// type-0 agents.
    pub efficiency: f64,
}

/// `C(s) = \int_0^s c dF`.
pub fn societal_cost(s: f64, inst: &Instance) -> f64 {
    inst.dist.integrate_df(|t| inst.cost.value(t), 0.0, s)
}

/// `\int_0^s (mu - theta) dF(theta)`, the mass-weighted ability advantage of
/// the high-effort group.
fn advantage(s: f64, inst: &Instance) -> f64 {
    let mu = inst.dist.mean();
    inst.dist.integrate_df(|t| mu - t, 0.0, s)
}

fn efficiency_from_advantage(s: f64, adv: f64, inst: &Instance) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let cfg = &inst.config;
    cfg.n as f64 * inst.cost.value(s) / (cfg.m as f64 * inst.dist.mean()) * adv
}

/// `eta(s) = n c(s) / (m mu) * \int_0^s (mu - theta) dF`, exactly 0 at the
/// boundary cutoffs.
pub fn selection_efficiency(s: f64, inst: &Instance) -> f64 {
    efficiency_from_advantage(s, advantage(s, inst), inst)
}

pub fn outcome(s: f64, inst: &Instance) -> OutcomePair {
    OutcomePair {
        cost: societal_cost(s, inst),
        efficiency: selection_efficiency(s, inst),
    }
}

/// Selection efficiency computed from the interim allocation of a specific
/// mechanism `v` at cutoff `s`:
/// `1 - (n/m) [Q_H \int_0^s theta dF + Q_L \int_s^1 theta dF] / mu`.
///
/// Agrees with [`selection_efficiency`] whenever `s` is an equilibrium of `v`.
pub fn efficiency_under_mechanism(v: &AllocationVector, s: f64, inst: &Instance) -> f64 {
    let q = interim_allocation(v, s, inst);
    let cfg = &inst.config;
    let below = inst.dist.integrate_df(|t| t, 0.0, s);
    let above = inst.dist.mean() - below;
    let selected_mean = cfg.n as f64 / cfg.m as f64 * (q.q_high * below + q.q_low * above);
    1.0 - selected_mean / inst.dist.mean()
}

/// Anything that maps a cutoff to a `(cost, efficiency)` pair with cost
/// strictly increasing in the cutoff.
pub trait FrontierSource: Sync {
    fn cost(&self, s: f64) -> f64;
    fn efficiency(&self, s: f64) -> f64;

    /// Evaluates a sorted grid; implementations may share work across points.
    fn sample(&self, grid: &[f64]) -> Vec<FrontierPoint> {
        grid.iter()
            .map(|&s| FrontierPoint { s, cost: self.cost(s), eta: self.efficiency(s), carry: 0.0 })
            .collect()
    }

    /// Point at `s > left.s`, continuing from an existing sample so that
    /// accumulated quantities stay consistent with it.
    fn step(&self, _left: &FrontierPoint, s: f64) -> FrontierPoint {
        FrontierPoint { s, cost: self.cost(s), eta: self.efficiency(s), carry: 0.0 }
    }
}

impl FrontierSource for Instance {
    fn cost(&self, s: f64) -> f64 {
        societal_cost(s, self)
    }

    fn efficiency(&self, s: f64) -> f64 {
        selection_efficiency(s, self)
    }

    /// Accumulates both integrals cell by cell instead of restarting at 0.
    fn sample(&self, grid: &[f64]) -> Vec<FrontierPoint> {
        let mu = self.dist.mean();
        let mut cost = 0.0;
        let mut adv = 0.0;
        let mut prev = 0.0;
        grid.iter()
            .map(|&s| {
                cost += self.dist.integrate_df(|t| self.cost.value(t), prev, s);
                adv += self.dist.integrate_df(|t| mu - t, prev, s);
                prev = s;
                FrontierPoint { s, cost, eta: efficiency_from_advantage(s, adv, self), carry: adv }
            })
            .collect()
    }

    fn step(&self, left: &FrontierPoint, s: f64) -> FrontierPoint {
        let mu = self.dist.mean();
        let cost = left.cost + self.dist.integrate_df(|t| self.cost.value(t), left.s, s);
        let adv = left.carry + self.dist.integrate_df(|t| mu - t, left.s, s);
        FrontierPoint { s, cost, eta: efficiency_from_advantage(s, adv, self), carry: adv }
    }
}

/// A frontier given directly as `eta = H(C)` for `C in [0, 1]`; the cutoff
/// parameter is the cost itself.
pub struct CostParametrized<H>(pub H);

impl<H: Fn(f64) -> f64 + Sync> FrontierSource for CostParametrized<H> {
    fn cost(&self, s: f64) -> f64 {
        s
    }

    fn efficiency(&self, s: f64) -> f64 {
        (self.0)(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub s: f64,
    pub cost: f64,
    pub eta: f64,
    /// Running integral kept by sources that accumulate along the grid.
    #[serde(skip)]
    pub carry: f64,
}

/// Sampled `(s, C(s), eta(s))` curve, ordered by `s` with `C` strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierCurve {
    pub points: Vec<FrontierPoint>,
}

/// Neighbouring samples whose efficiencies differ by more than this get a
/// midpoint inserted.
pub const REFINE_ETA_STEP: f64 = 1e-3;
const MAX_REFINE_ROUNDS: usize = 40;
const MIN_REFINE_WIDTH: f64 = 1e-12;

impl FrontierCurve {
    /// Samples `source` on a uniform grid of `grid_size` points over `[0, 1]`
    /// merged with `knots`, then bisects cells where `eta` jumps by more than
    /// [`REFINE_ETA_STEP`].
    pub fn build<S: FrontierSource + ?Sized>(source: &S, grid_size: usize, knots: &[f64]) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::invalid("grid_size", "need at least 2 points"));
        }
        let mut grid: Vec<f64> = (0..grid_size).map(|i| i as f64 / (grid_size - 1) as f64).collect();
        grid.extend(knots.iter().copied().filter(|s| (0.0..=1.0).contains(s)));
        sort_dedup(&mut grid);
        let mut curve = Self { points: source.sample(&grid) };
        for _ in 0..MAX_REFINE_ROUNDS {
            let extra: Vec<f64> = curve
                .points
                .windows(2)
                .filter(|w| (w[1].eta - w[0].eta).abs() > REFINE_ETA_STEP && w[1].s - w[0].s > MIN_REFINE_WIDTH)
                .map(|w| 0.5 * (w[0].s + w[1].s))
                .collect();
            if extra.is_empty() {
                break;
            }
            curve.insert_unchecked(source, &extra);
        }
        curve.validate()?;
        Ok(curve)
    }

    fn validate(&self) -> Result<()> {
        for (i, w) in self.points.windows(2).enumerate() {
            if !(w[1].cost > w[0].cost) {
                return Err(Error::Numerical(format!(
                    "societal cost not strictly increasing between s={} (C={}) and s={} (C={}) at sample {}",
                    w[0].s,
                    w[0].cost,
                    w[1].s,
                    w[1].cost,
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Adds samples at the given cutoffs (keeping order) by evaluating
    /// `source` there.
    pub fn insert<S: FrontierSource + ?Sized>(&mut self, source: &S, cutoffs: &[f64]) -> Result<()> {
        self.insert_unchecked(source, cutoffs);
        self.validate()
    }

    fn insert_unchecked<S: FrontierSource + ?Sized>(&mut self, source: &S, cutoffs: &[f64]) {
        for &s in cutoffs {
            let i = self.points.partition_point(|p| p.s < s);
            if self.points.get(i).is_some_and(|p| p.s == s) {
                continue;
            }
            let p = match i.checked_sub(1) {
                Some(l) => source.step(&self.points[l], s),
                None => source.step(&FrontierPoint { s: 0.0, cost: 0.0, eta: 0.0, carry: 0.0 }, s),
            };
            self.points.insert(i, p);
        }
    }

    /// `C^{-1}`: cutoff whose cost equals `target`, by bisection between the
    /// bracketing samples.
    pub fn cost_inverse<S: FrontierSource + ?Sized>(&self, source: &S, target: f64) -> f64 {
        let first = self.points.first().expect("non-empty frontier");
        let last = self.points.last().expect("non-empty frontier");
        if target <= first.cost {
            return first.s;
        }
        if target >= last.cost {
            return last.s;
        }
        let i = self.points.partition_point(|p| p.cost < target);
        if self.points[i].cost == target {
            return self.points[i].s;
        }
        let (lo, hi) = (self.points[i - 1].s, self.points[i].s);
        bisect(|s| source.cost(s) - target, lo, hi, 1e-14)
    }
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

/// Slope of the frontier `d eta / d C` at a cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetSlope {
    /// Average of the one-sided slopes.
    pub value: f64,
    pub left: f64,
    pub right: f64,
    /// `true` when the cost has a kink at `s` and the one-sided slopes differ.
    pub kink: bool,
}

/// Cost elasticity with respect to the type percentile,
/// `eps(s) = c'(s) F(s) / (c(s) f(s))`, using the right derivative.
pub fn cost_elasticity(s: f64, inst: &Instance) -> Result<f64> {
    let c = inst.cost.value(s);
    let f = inst.dist.pdf(s);
    if c * f == 0.0 || !(c * f).is_finite() {
        if s < ELASTICITY_FLOOR {
            return cost_elasticity(ELASTICITY_FLOOR, inst);
        }
        return Err(Error::Numerical(format!("cost elasticity undefined at s={s}: c={c}, f={f}")));
    }
    Ok(inst.cost.derivative(s).1 * inst.dist.cdf(s) / (c * f))
}

/// `H'(C(s)) = n/(m mu) [(mu - s) + eps(s) (mu - E[theta | theta < s])]`.
///
/// When `c(s) f(s)` vanishes near 0 the value is taken from
/// `s = 1e-4`; elsewhere it is an error.
pub fn budget_derivative(s: f64, inst: &Instance) -> Result<BudgetSlope> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid("s", format!("{s} outside [0, 1]")));
    }
    let c = inst.cost.value(s);
    let f = inst.dist.pdf(s);
    if c * f == 0.0 || !(c * f).is_finite() {
        if s < ELASTICITY_FLOOR {
            return budget_derivative(ELASTICITY_FLOOR, inst);
        }
        return Err(Error::Numerical(format!("budget slope undefined at s={s}: c={c}, f={f}")));
    }
    let mu = inst.dist.mean();
    let scale = inst.config.n as f64 / (inst.config.m as f64 * mu);
    // eps(s) (mu - E[theta|theta<s]) = c'(s) \int_0^s (mu - theta) dF / (c f)
    let adv = advantage(s, inst);
    let (dl, dr) = inst.cost.derivative(s);
    let left = scale * ((mu - s) + dl * adv / (c * f));
    let right = scale * ((mu - s) + dr * adv / (c * f));
    Ok(BudgetSlope { value: 0.5 * (left + right), left, right, kink: dl != dr })
}
