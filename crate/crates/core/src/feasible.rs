//! Cutoffs that some admissible mechanism can sustain as a symmetric
//! equilibrium, and synthesis of a mechanism for a chosen cutoff.
//!
//! With mechanisms restricted to `v_min <= v <= v_max`, a cutoff `s` is
//! feasible iff `phi(s, v_min) <= 0` (unless `s = 1`) and `phi(s, v_max) >= 0`
//! (unless `s = 0`); `phi` is increasing in every component of `v`.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{phi, ScanOptions};
use crate::error::{Error, Result};
use crate::model::{AllocationVector, Instance, MechanismFamily};
use crate::numeric::{bisect, scan_roots};

/// Interval endpoints closer than this are merged.
pub const MERGE_TOL: f64 = 1e-8;

/// Sorted, pairwise disjoint closed intervals in `[0, 1]`; `[a, a]` is a
/// singleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    pub intervals: Vec<[f64; 2]>,
}

impl FeasibleSet {
    pub fn singleton(s: f64) -> Self {
        Self { intervals: vec![[s, s]] }
    }

    pub fn full() -> Self {
        Self { intervals: vec![[0.0, 1.0]] }
    }

    pub fn contains(&self, s: f64, tol: f64) -> bool {
        self.intervals.iter().any(|&[a, b]| s >= a - tol && s <= b + tol)
    }

    /// Largest feasible cutoff.
    pub fn max(&self) -> f64 {
        self.intervals.last().map_or(0.0, |iv| iv[1])
    }

    /// All interval endpoints, ascending.
    pub fn endpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.intervals.iter().flat_map(|iv| [iv[0], iv[1]]).collect();
        out.dedup();
        out
    }

    /// Every interval of `self` lies inside some interval of `other`.
    pub fn is_subset_of(&self, other: &Self, tol: f64) -> bool {
        self.intervals
            .iter()
            .all(|&[a, b]| other.intervals.iter().any(|&[c, d]| a >= c - tol && b <= d + tol))
    }

    /// Total length of the intervals.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|iv| iv[1] - iv[0]).sum()
    }

    fn from_raw(mut raw: Vec<[f64; 2]>) -> Self {
        raw.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let mut intervals: Vec<[f64; 2]> = Vec::with_capacity(raw.len());
        for iv in raw {
            match intervals.last_mut() {
                Some(last) if iv[0] <= last[1] + MERGE_TOL => last[1] = last[1].max(iv[1]),
                _ => intervals.push(iv),
            }
        }
        Self { intervals }
    }
}

/// Builds the set `{s : lower(s) && upper(s)}` where
/// `lower(s) = s == 1 || phi(s, v_min) <= 0` (skipped when `v_min` is `None`)
/// and `upper(s) = s == 0 || phi(s, v_max) >= 0`.
fn feasible_from_bounds(
    v_min: Option<&AllocationVector>,
    v_max: &AllocationVector,
    inst: &Instance,
    opts: &ScanOptions,
) -> FeasibleSet {
    let lo = |s: f64| v_min.map_or(-1.0, |v| phi(s, v, inst));
    let hi = |s: f64| phi(s, v_max, inst);

    let mut breaks = vec![0.0, 1.0];
    if v_min.is_some() {
        breaks.extend(scan_roots(lo, 0.0, 1.0, opts.grid, opts.root_tol, opts.class_tol).iter().map(|r| r.x));
    }
    breaks.extend(scan_roots(hi, 0.0, 1.0, opts.grid, opts.root_tol, opts.class_tol).iter().map(|r| r.x));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= opts.root_tol);

    let strict = |s: f64| lo(s) <= 0.0 && hi(s) >= 0.0;
    let at_point = |s: f64| {
        (s == 1.0 || lo(s) <= opts.class_tol) && (s == 0.0 || hi(s) >= -opts.class_tol)
    };

    let mut raw = Vec::new();
    for w in breaks.windows(2) {
        if strict(0.5 * (w[0] + w[1])) {
            raw.push([w[0], w[1]]);
        }
    }
    for &b in &breaks {
        if at_point(b) && !raw.iter().any(|iv| b >= iv[0] && b <= iv[1]) {
            raw.push([b, b]);
        }
    }
    FeasibleSet::from_raw(raw)
}

/// Feasible cutoffs for mechanisms between `v_min` and `v_max`.
pub fn feasible_set(
    v_min: &AllocationVector,
    v_max: &AllocationVector,
    inst: &Instance,
    opts: &ScanOptions,
) -> Result<FeasibleSet> {
    if !v_min.le(v_max) {
        return Err(Error::invalid("vmin", "must not exceed vmax componentwise"));
    }
    Ok(feasible_from_bounds(Some(v_min), v_max, inst, opts))
}

/// Feasible cutoffs under all admissible mechanisms: `0` together with the
/// cutoffs where the standard contest gives a non-negative incentive.
pub fn feasible_set_default(inst: &Instance, opts: &ScanOptions) -> FeasibleSet {
    let v_max = AllocationVector::standard(&inst.config);
    feasible_from_bounds(None, &v_max, inst, opts)
}

/// `phi(s, 1) = (1/n) sum_{k=0}^{n-2} (1 - F(s))^k - c(s)` for a single prize.
pub fn phi_single_prize(s: f64, inst: &Instance) -> f64 {
    let n = inst.config.n;
    let q = 1.0 - inst.dist.cdf(s);
    let sum: f64 = (0..=n - 2).map(|k| q.powi(k as i32)).sum();
    sum / n as f64 - inst.cost.value(s)
}

/// Single-prize feasible set `{0}`, `[0, s_max]` or `[0, 1]`, with `s_max`
/// the zero of the strictly decreasing [`phi_single_prize`].
pub fn single_prize_feasible(inst: &Instance) -> Result<FeasibleSet> {
    if inst.config.m != 1 {
        return Err(Error::invalid("m", format!("single-prize feasible set needs m = 1, got {}", inst.config.m)));
    }
    let f = |s: f64| phi_single_prize(s, inst);
    if f(0.0) <= 0.0 {
        return Ok(FeasibleSet::singleton(0.0));
    }
    if f(1.0) >= 0.0 {
        return Ok(FeasibleSet::full());
    }
    let root = bisect(f, 0.0, 1.0, 1e-14);
    Ok(FeasibleSet { intervals: vec![[0.0, root]] })
}

/// `phi(s, v_Q(t))` for the quota family in closed form:
/// `m [ (t/n) sum (1-F)^k - ((1-t)/n) sum F^k ] - c(s)`, sums over
/// `k = 0..=n-2`. With `m = 1` this is the single-prize expression.
pub fn phi_quota(s: f64, t: f64, inst: &Instance) -> f64 {
    let n = inst.config.n;
    let p = inst.dist.cdf(s);
    let (mut up, mut down) = (0.0, 0.0);
    for k in 0..=n - 2 {
        up += (1.0 - p).powi(k as i32);
        down += p.powi(k as i32);
    }
    inst.config.m as f64 * (t * up - (1.0 - t) * down) / n as f64 - inst.cost.value(s)
}

/// Quota share `t(s)` that makes interior `s` the unique equilibrium:
/// `(sum F^k + n c(s)/m) / (sum F^k + sum (1-F)^k)`.
///
/// Requires `m = 1` unless `relaxed` is set.
pub fn quota_parameter(s: f64, inst: &Instance, relaxed: bool) -> Result<f64> {
    let (n, m) = (inst.config.n, inst.config.m);
    if m != 1 && !relaxed {
        return Err(Error::invalid("m", format!("quota mechanisms need m = 1, got {m}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid("s", format!("closed form only covers interior cutoffs, got {s}")));
    }
    let p = inst.dist.cdf(s);
    let (mut up, mut down) = (0.0, 0.0);
    for k in 0..=n - 2 {
        up += (1.0 - p).powi(k as i32);
        down += p.powi(k as i32);
    }
    let t = (down + n as f64 * inst.cost.value(s) / m as f64) / (down + up);
    if !(0.0..=1.0 + 1e-12).contains(&t) {
        return Err(Error::Infeasible { s });
    }
    Ok(t.min(1.0))
}

/// Parameter `t` of `family` under which `s` is an equilibrium cutoff.
///
/// Interior targets are found by bisection on `t -> phi(s, v(t))`, which is
/// continuous and changes sign on `[0, 1]` exactly when `s` is feasible.
pub fn synthesize_mechanism(s: f64, family: &MechanismFamily, inst: &Instance, opts: &ScanOptions) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid("target_s", format!("{s} outside [0, 1]")));
    }
    let g = |t: f64| phi(s, &family.at(t), inst);
    if s == 0.0 {
        return if g(0.0) <= opts.class_tol { Ok(0.0) } else { Err(Error::Infeasible { s }) };
    }
    if s == 1.0 {
        return if g(1.0) >= -opts.class_tol { Ok(1.0) } else { Err(Error::Infeasible { s }) };
    }
    let (g0, g1) = (g(0.0), g(1.0));
    if g0 > 0.0 || g1 < 0.0 {
        return Err(Error::Infeasible { s });
    }
    Ok(bisect(g, 0.0, 1.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::find_equilibria;
    use crate::model::{ContestConfig, CostFunction, TypeDistribution};

    fn opts() -> ScanOptions {
        ScanOptions::default()
    }

    #[test]
    fn fig1_two_intervals() {
        let inst = Instance::two_interval_example();
        let cfg = inst.config;
        let set = feasible_set(&AllocationVector::reversed(&cfg), &AllocationVector::standard(&cfg), &inst, &opts()).unwrap();
        assert_eq!(set.intervals.len(), 2);
        assert_eq!(set.intervals[0][0], 0.0);
        assert!((set.intervals[0][1] - 0.47976448).abs() < 1e-7);
        assert!((set.intervals[1][0] - 0.91809379).abs() < 1e-7);
        assert_eq!(set.intervals[1][1], 1.0);
        assert_eq!(feasible_set_default(&inst, &opts()), set);
        let from_random =
            feasible_set(&AllocationVector::random(&cfg), &AllocationVector::standard(&cfg), &inst, &opts()).unwrap();
        assert_eq!(from_random, set);
        let lower =
            feasible_set(&AllocationVector::reversed(&cfg), &AllocationVector::random(&cfg), &inst, &opts()).unwrap();
        assert_eq!(lower, FeasibleSet::singleton(0.0));
    }

    #[test]
    fn high_fixed_cost_only_zero() {
        // phi(0, 1) = (n-1)/n - c(0) < 0
        let cfg = ContestConfig::new(4, 1, 1.0).unwrap();
        let inst = Instance::new(cfg, TypeDistribution::uniform(), CostFunction::affine(0.1, 0.8).unwrap()).unwrap();
        assert!(phi_single_prize(0.0, &inst) < 0.0);
        assert_eq!(feasible_set_default(&inst, &opts()), FeasibleSet::singleton(0.0));
        assert_eq!(single_prize_feasible(&inst).unwrap(), FeasibleSet::singleton(0.0));
    }

    #[test]
    fn tiny_gamma_everything_feasible() {
        let inst = Instance::power_family(5, 1, 1.0, 2.0, 1e-3, 1.0).unwrap();
        assert!(phi(1.0, &AllocationVector::standard(&inst.config), &inst) >= 0.0);
        assert_eq!(feasible_set_default(&inst, &opts()), FeasibleSet::full());
        assert_eq!(single_prize_feasible(&inst).unwrap(), FeasibleSet::full());
    }

    #[test]
    fn single_prize_linear_case() {
        // n = 2, uniform, c = s/2 + 1/8: phi = 1/2 - s/2 - 1/8 => s_max = 0.75.
        let cfg = ContestConfig::new(2, 1, 1.0).unwrap();
        let inst = Instance::new(cfg, TypeDistribution::uniform(), CostFunction::affine(0.5, 0.125).unwrap()).unwrap();
        let set = single_prize_feasible(&inst).unwrap();
        assert!((set.max() - 0.75).abs() < 1e-12);
        let general = feasible_set_default(&inst, &opts());
        assert!((general.max() - 0.75).abs() < 1e-9);
        assert!(single_prize_feasible(&Instance::two_interval_example()).is_err());
    }

    #[test]
    fn single_prize_closed_form_matches_general_phi() {
        let inst = Instance::power_family(6, 1, 1.0, 1.5, 0.4, 0.9).unwrap();
        let v = AllocationVector::standard(&inst.config);
        for i in 0..=40 {
            let s = i as f64 / 40.0;
            assert!((phi_single_prize(s, &inst) - phi(s, &v, &inst)).abs() < 1e-12);
        }
    }

    #[test]
    fn quota_parameter_two_agents() {
        let cfg = ContestConfig::new(2, 1, 1.0).unwrap();
        let inst = Instance::new(cfg, TypeDistribution::uniform(), CostFunction::affine(0.5, 0.0).unwrap()).unwrap();
        let t = quota_parameter(0.5, &inst, false).unwrap();
        assert!((t - 0.75).abs() < 1e-15);
        let v = AllocationVector::new(&cfg, vec![t]).unwrap();
        assert!(phi(0.5, &v, &inst).abs() < 1e-15);
        assert!(quota_parameter(0.0, &inst, false).is_err());
        assert!(quota_parameter(1.0, &inst, false).is_err());
    }

    #[test]
    fn quota_closed_form_phi_and_monotonicity() {
        let inst = Instance::power_family(5, 1, 1.0, 0.7, 0.6, 1.3).unwrap();
        let fam = MechanismFamily::quota(&inst.config, false).unwrap();
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let mut prev = f64::INFINITY;
            for j in 0..=50 {
                let s = j as f64 / 50.0;
                let closed = phi_quota(s, t, &inst);
                assert!((closed - phi(s, &fam.at(t), &inst)).abs() < 1e-12);
                assert!(closed < prev);
                prev = closed;
                if i > 0 {
                    assert!(closed > phi_quota(s, t - 0.1, &inst));
                }
            }
        }
    }

    #[test]
    fn synthesize_quota_matches_closed_form() {
        let inst = Instance::power_family(4, 1, 1.0, 1.2, 0.5, 1.0).unwrap();
        let fam = MechanismFamily::quota(&inst.config, false).unwrap();
        let set = single_prize_feasible(&inst).unwrap();
        for s in [0.1, 0.3, 0.5 * set.max()] {
            let t = synthesize_mechanism(s, &fam, &inst, &opts()).unwrap();
            assert!((t - quota_parameter(s, &inst, false).unwrap()).abs() < 1e-8);
        }
        assert_eq!(synthesize_mechanism(0.0, &MechanismFamily::blind_eye(&inst.config), &inst, &opts()).unwrap(), 0.0);
        let beyond = 0.5 * (set.max() + 1.0);
        assert!(matches!(synthesize_mechanism(beyond, &fam, &inst, &opts()), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn synthesize_blind_eye_fig1() {
        let inst = Instance::two_interval_example();
        let fam = MechanismFamily::blind_eye(&inst.config);
        let t = synthesize_mechanism(0.3, &fam, &inst, &opts()).unwrap();
        assert!(t > 0.0 && t < 1.0);
        let v = fam.at(t);
        assert!(phi(0.3, &v, &inst).abs() < 1e-9);
        let eq = find_equilibria(&v, &inst, &opts());
        assert!(eq.equilibria.iter().any(|e| (e.s - 0.3).abs() < 1e-8), "{eq:?}");
    }

    #[test]
    fn relaxed_quota_is_scaled_single_prize() {
        let inst = Instance::power_family(5, 2, 1.0, 1.0, 0.6, 1.0).unwrap();
        assert!(quota_parameter(0.3, &inst, false).is_err());
        let t = quota_parameter(0.3, &inst, true).unwrap();
        let fam = MechanismFamily::quota(&inst.config, true).unwrap();
        assert!(phi(0.3, &fam.at(t), &inst).abs() < 1e-12);
    }

    #[test]
    fn interval_helpers() {
        let a = FeasibleSet { intervals: vec![[0.0, 0.2], [0.5, 0.6]] };
        let b = FeasibleSet { intervals: vec![[0.0, 0.3], [0.4, 1.0]] };
        assert!(a.is_subset_of(&b, 0.0));
        assert!(!b.is_subset_of(&a, 0.0));
        assert!(a.contains(0.55, 0.0) && !a.contains(0.3, 0.0));
        assert!((a.measure() - 0.3).abs() < 1e-15);
        let merged = FeasibleSet::from_raw(vec![[0.5, 0.7], [0.0, 0.2], [0.2 + 1e-9, 0.4]]);
        assert_eq!(merged.intervals, vec![[0.0, 0.4], [0.5, 0.7]]);
    }
}
