#![allow(dead_code)]

use contestlab::{AllocationVector, ContestConfig, CostFunction, Instance, TypeDistribution};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_dist(rng: &mut ChaCha8Rng) -> TypeDistribution {
    match rng.random_range(0..3) {
        0 => TypeDistribution::uniform(),
        1 => TypeDistribution::power(rng.random_range(0.4..3.0)).unwrap(),
        _ => {
            let x = vec![0.0, 0.2, 0.45, 0.7, 1.0];
            let mut cdf = vec![0.0];
            let mut acc = 0.0;
            let weights: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for w in &weights[..3] {
                acc += w / total;
                cdf.push(acc);
            }
            cdf.push(1.0);
            TypeDistribution::tabulated(x, cdf).unwrap()
        }
    }
}

pub fn random_cost(rng: &mut ChaCha8Rng, dist: &TypeDistribution, scale: f64) -> CostFunction {
    match rng.random_range(0..4) {
        0 => CostFunction::affine(scale * rng.random_range(0.1..1.5), scale * rng.random_range(0.0..0.2)).unwrap(),
        1 => CostFunction::power(scale * rng.random_range(0.1..1.5), rng.random_range(0.5..3.0)).unwrap(),
        2 => CostFunction::cdf_power(scale * rng.random_range(0.1..1.5), rng.random_range(0.5..2.5), dist).unwrap(),
        _ => {
            let x = vec![0.0, 0.25, 0.5, 0.75, 1.0];
            let mut c = vec![scale * rng.random_range(0.0..0.1)];
            for _ in 0..4 {
                let last = *c.last().unwrap();
                c.push(last + scale * rng.random_range(0.05..0.4));
            }
            CostFunction::tabulated(x, c).unwrap()
        }
    }
}

/// Random instance with `n` in `n_lo..=n_hi` and `m` drawn in `1..n` unless fixed.
pub fn random_instance(rng: &mut ChaCha8Rng, n_lo: usize, n_hi: usize, m: Option<usize>, lambda: f64) -> Instance {
    let n = rng.random_range(n_lo..=n_hi);
    let m = m.unwrap_or_else(|| rng.random_range(1..n));
    let dist = random_dist(rng);
    // Keep costs comparable to the per-agent prize share so feasible sets
    // are non-trivial.
    let scale = m as f64 / n as f64;
    let cost = random_cost(rng, &dist, scale);
    Instance::new(ContestConfig::new(n, m, lambda).unwrap(), dist, cost).unwrap()
}

/// Random vector with every component inside the admissible bounds.
pub fn random_compliant(rng: &mut ChaCha8Rng, config: &ContestConfig) -> AllocationVector {
    let (n, m) = (config.n, config.m);
    let v = (1..n)
        .map(|k| {
            let lo = (m + k).saturating_sub(n) as f64;
            let hi = k.min(m) as f64;
            lo + (hi - lo) * rng.random::<f64>()
        })
        .collect();
    AllocationVector::new(config, v).unwrap()
}
