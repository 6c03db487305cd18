//! Monte Carlo play of a contest: draw types, apply the cutoff strategy,
//! realize the exact-`m` lottery and estimate cost, efficiency and
//! deviation incentives.
//!
//! Trial `i` draws from a ChaCha stream keyed by `(seed, i)`, and per-trial
//! statistics are reduced in fixed-size chunks combined in order, so reports
//! are bit-identical for a given seed regardless of the thread count.

use std::ops::Range;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AllocationVector, Instance};
use crate::numeric::pairwise_sum;

const CHUNK: usize = 1024;

/// Indicator vector over agents of one realized allocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LotteryOutcome {
    pub selected: Vec<bool>,
}

impl LotteryOutcome {
    pub fn count(&self) -> usize {
        self.selected.iter().filter(|&&x| x).count()
    }
}

/// Draws the number `z` of prizes going to the `k` high-effort agents
/// (`floor(v_k)` or `ceil(v_k)`, with mean `v_k`).
fn high_group_prizes<R: Rng + ?Sized>(v: &AllocationVector, k: usize, rng: &mut R) -> Result<usize> {
    let n = v.n();
    let m = v.m();
    let target = v.total(k);
    let floor = target.floor();
    let frac = target - floor;
    let z = floor as usize + usize::from(frac > 0.0 && rng.random::<f64>() < frac);
    if z > k || m < z || m - z > n - k {
        return Err(Error::invalid("v", format!("v_{k} = {target} cannot be realized with {k} high-effort agents")));
    }
    Ok(z)
}

/// One realization of the exact-`m` lottery for the action profile
/// `high` (`true` = high effort). Within each effort group the winners are a
/// uniform subset, so each high agent wins with probability `v_k / k` and
/// each low agent with `(m - v_k) / (n - k)`.
pub fn realize_lottery<R: Rng + ?Sized>(v: &AllocationVector, high: &[bool], rng: &mut R) -> Result<LotteryOutcome> {
    if high.len() != v.n() {
        return Err(Error::invalid("actions", format!("expected {} agents, got {}", v.n(), high.len())));
    }
    if let Some(k) = v.bound_violation() {
        return Err(Error::invalid(format!("v[{}]", k - 1), "outside the admissible bounds"));
    }
    let highs: Vec<usize> = (0..high.len()).filter(|&i| high[i]).collect();
    let lows: Vec<usize> = (0..high.len()).filter(|&i| !high[i]).collect();
    let z = high_group_prizes(v, highs.len(), rng)?;
    let mut selected = vec![false; high.len()];
    for i in sample(rng, highs.len(), z) {
        selected[highs[i]] = true;
    }
    for i in sample(rng, lows.len(), v.m() - z) {
        selected[lows[i]] = true;
    }
    Ok(LotteryOutcome { selected })
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `|self - target|` in units of the standard error (infinite when the
    /// error is zero and the estimate is off).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        self.z_score(target) <= k
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn combine(parts: &[Moments]) -> Moments {
        let sums: Vec<f64> = parts.iter().map(|p| p.sum).collect();
        let sqs: Vec<f64> = parts.iter().map(|p| p.sum_sq).collect();
        Moments { count: parts.iter().map(|p| p.count).sum(), sum: pairwise_sum(&sums), sum_sq: pairwise_sum(&sqs) }
    }

    fn estimate(&self) -> Estimate {
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = if self.count > 1 { ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Estimate { mean, se: (var / n).sqrt() }
    }
}

/// Runs `body` over consecutive trial chunks and returns the per-chunk
/// results in chunk order.
fn map_chunks<T, F>(trials: usize, body: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    let chunks: Vec<Range<usize>> = (0..trials.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(trials)).collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        chunks.into_par_iter().map(&body).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        chunks.into_iter().map(body).collect()
    }
}

/// Independent random stream of trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub trials: usize,
    pub seed: u64,
    #[serde(rename = "C_hat")]
    pub cost: Estimate,
    pub eta_hat: Estimate,
    /// Mean selected type.
    pub selected_type: Estimate,
    /// Prizes won by high-effort agents per agent, an estimate of `F(s) Q(H)`.
    pub high_share: Estimate,
    /// Prizes won by low-effort agents per agent, an estimate of `(1 - F(s)) Q(L)`.
    pub low_share: Estimate,
    pub exact_m_violations: usize,
    pub bound_violations: usize,
}

#[derive(Default, Clone, Copy)]
struct RunChunk {
    cost: Moments,
    selected: Moments,
    high: Moments,
    low: Moments,
    exact_m: usize,
    bounds: usize,
}

/// Plays `trials` independent contests in which every agent uses cutoff `s`
/// (type below `s` means high effort) under mechanism `v`.
pub fn run(v: &AllocationVector, s: f64, inst: &Instance, trials: usize, seed: u64) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if v.n() != inst.config.n || v.m() != inst.config.m {
        return Err(Error::invalid("v", "does not match the contest size"));
    }
    if let Some(k) = v.bound_violation() {
        return Err(Error::invalid(format!("v[{}]", k - 1), "outside the admissible bounds"));
    }
    let n = inst.config.n;
    let m = inst.config.m;
    let mu = inst.dist.mean();

    let chunks = map_chunks(trials, |range| -> Result<RunChunk> {
        let mut acc = RunChunk::default();
        let mut types = vec![0.0; n];
        let mut high = vec![false; n];
        for trial in range {
            let mut rng = trial_rng(seed, trial as u64);
            for i in 0..n {
                types[i] = inst.dist.quantile(rng.random::<f64>());
                high[i] = types[i] < s;
            }
            let outcome = realize_lottery(v, &high, &mut rng)?;
            let k = high.iter().filter(|&&h| h).count();
            let won_high = (0..n).filter(|&i| high[i] && outcome.selected[i]).count();
            let won = outcome.count();
            if won != m {
                acc.exact_m += 1;
            }
            let z = won_high as f64;
            if z < v.lower_bound(k) || z > v.upper_bound(k) {
                acc.bounds += 1;
            }
            let effort: f64 = (0..n).filter(|&i| high[i]).map(|i| inst.cost.value(types[i])).sum();
            let picked: f64 = (0..n).filter(|&i| outcome.selected[i]).map(|i| types[i]).sum();
            acc.cost.push(effort / n as f64);
            acc.selected.push(picked / m as f64);
            acc.high.push(z / n as f64);
            acc.low.push((won - won_high) as f64 / n as f64);
        }
        Ok(acc)
    });
    let chunks = chunks.into_iter().collect::<Result<Vec<_>>>()?;

    let pick = |f: fn(&RunChunk) -> Moments| Moments::combine(&chunks.iter().map(f).collect::<Vec<_>>()).estimate();
    let selected_type = pick(|c| c.selected);
    Ok(SimulationReport {
        trials,
        seed,
        cost: pick(|c| c.cost),
        eta_hat: Estimate { mean: 1.0 - selected_type.mean / mu, se: selected_type.se / mu },
        selected_type,
        high_share: pick(|c| c.high),
        low_share: pick(|c| c.low),
        exact_m_violations: chunks.iter().map(|c| c.exact_m).sum(),
        bound_violations: chunks.iter().map(|c| c.bounds).sum(),
    })
}

/// Deviation audit for one probe type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditRow {
    pub theta: f64,
    /// Action the cutoff prescribes (`true` = high effort).
    pub prescribed_high: bool,
    pub payoff_prescribed: f64,
    pub payoff_deviant: f64,
    /// Deviant minus prescribed payoff, with its paired standard error.
    pub gain: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationAudit {
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<AuditRow>,
}

impl DeviationAudit {
    /// Row with the largest estimated deviation gain.
    pub fn worst(&self) -> Option<&AuditRow> {
        self.rows.iter().max_by(|a, b| a.gain.mean.total_cmp(&b.gain.mean))
    }

    /// Largest gain measured in standard errors (0 when the gain is exactly 0).
    pub fn max_gain_z(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| if r.gain.mean == 0.0 { 0.0 } else { r.gain.mean / r.gain.se })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evenly spaced probe types `0, 1/(k-1), ..., 1`.
pub fn probe_grid(k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
    }
}

/// Estimates, for each probe type, the payoff of the prescribed action and of
/// the opposite action while opponents play cutoff `s`. Both actions face the
/// same opponent types and the same lottery randomness in every trial.
pub fn deviation_audit(
    v: &AllocationVector,
    s: f64,
    inst: &Instance,
    probes: &[f64],
    trials: usize,
    seed: u64,
) -> Result<DeviationAudit> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if let Some(k) = v.bound_violation() {
        return Err(Error::invalid(format!("v[{}]", k - 1), "outside the admissible bounds"));
    }
    let n = inst.config.n;
    let mut rows = Vec::with_capacity(probes.len());
    for &theta in probes {
        let prescribed_high = theta < s;
        let effort = inst.cost.value(theta);
        let chunks = map_chunks(trials, |range| -> Result<[Moments; 3]> {
            let mut acc = [Moments::default(); 3];
            let mut high = vec![false; n];
            for trial in range {
                let mut rng = trial_rng(seed, trial as u64);
                for h in high.iter_mut().skip(1) {
                    *h = inst.dist.quantile(rng.random::<f64>()) < s;
                }
                let mut payoff = [0.0; 2];
                for (slot, own_high) in [prescribed_high, !prescribed_high].into_iter().enumerate() {
                    high[0] = own_high;
                    let mut lottery = rng.clone();
                    let won = realize_lottery(v, &high, &mut lottery)?.selected[0];
                    payoff[slot] = f64::from(u8::from(won)) - if own_high { effort } else { 0.0 };
                }
                acc[0].push(payoff[0]);
                acc[1].push(payoff[1]);
                acc[2].push(payoff[1] - payoff[0]);
            }
            Ok(acc)
        });
        let chunks = chunks.into_iter().collect::<Result<Vec<_>>>()?;
        let est = |i: usize| Moments::combine(&chunks.iter().map(|c| c[i]).collect::<Vec<_>>()).estimate();
        rows.push(AuditRow {
            theta,
            prescribed_high,
            payoff_prescribed: est(0).mean,
            payoff_deviant: est(1).mean,
            gain: est(2),
        });
    }
    Ok(DeviationAudit { trials, seed, rows })
}
