//! WebAssembly bindings for the browser demo. Each exported function takes
//! plain numbers and returns a JSON string; the Rust-side `*_report`
//! functions hold the logic and are tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use contestlab::equilibrium::{find_equilibria, phi, ScanOptions};
use contestlab::feasible::feasible_set_default;
use contestlab::optimal::{solve, OptimizeOptions};
use contestlab::statics::{s_max_single_prize, s_star_relaxed, PowerFamily};
use contestlab::{AllocationVector, ContestConfig, CostFunction, Instance, TypeDistribution};

#[derive(Debug, Serialize)]
pub struct PhiReport {
    pub s: Vec<f64>,
    pub phi_standard: Vec<f64>,
    pub phi_reversed: Vec<f64>,
    pub feasible: Vec<[f64; 2]>,
    pub standard_equilibria: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct EnvelopeReport {
    /// Frontier samples `(C, eta0)`, thinned for plotting.
    pub frontier: Vec<[f64; 2]>,
    /// Concave envelope vertices `(C, eta)`.
    pub envelope: Vec<[f64; 2]>,
    pub c_star: f64,
    pub s_star: f64,
    pub eta: f64,
    pub payoff: f64,
}

#[derive(Debug, Serialize)]
pub struct StaticsReport {
    pub s_star_raw: f64,
    pub s_star: f64,
    pub s_max: Option<f64>,
    pub s_opt: f64,
    /// `(lambda, s)` pairs of the relaxed optimum across cost weights.
    pub lambda_path: Vec<[f64; 2]>,
}

fn instance(n: usize, m: usize, lambda: f64, alpha: f64, slope: f64, intercept: f64) -> Result<Instance, String> {
    let config = ContestConfig::new(n, m, lambda).map_err(|e| e.to_string())?;
    let dist = TypeDistribution::power(alpha).map_err(|e| e.to_string())?;
    let cost = CostFunction::affine(slope, intercept).map_err(|e| e.to_string())?;
    Instance::new(config, dist, cost).map_err(|e| e.to_string())
}

/// Deviation incentives of the standard and reversed contests on a grid,
/// with the feasible set, for `F = x^alpha` and affine cost.
pub fn phi_report(n: usize, m: usize, alpha: f64, slope: f64, intercept: f64, grid: usize) -> Result<PhiReport, String> {
    let inst = instance(n, m, 1.0, alpha, slope, intercept)?;
    let grid = grid.clamp(2, 4001);
    let high = AllocationVector::standard(&inst.config);
    let low = AllocationVector::reversed(&inst.config);
    let s: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let opts = ScanOptions::default();
    Ok(PhiReport {
        phi_standard: s.iter().map(|&x| phi(x, &high, &inst)).collect(),
        phi_reversed: s.iter().map(|&x| phi(x, &low, &inst)).collect(),
        s,
        feasible: feasible_set_default(&inst, &opts).intervals,
        standard_equilibria: find_equilibria(&high, &inst, &opts).cutoffs(),
    })
}

/// Optimal design for the same instance family at cost weight `lambda`.
pub fn envelope_report(n: usize, m: usize, alpha: f64, slope: f64, intercept: f64, lambda: f64) -> Result<EnvelopeReport, String> {
    let inst = instance(n, m, lambda, alpha, slope, intercept)?;
    let opts = OptimizeOptions { frontier_grid: 1024, ..OptimizeOptions::default() };
    let sol = solve(&inst, None, &opts).map_err(|e| e.to_string())?;
    let stride = (sol.restricted.len() / 600).max(1);
    Ok(EnvelopeReport {
        frontier: sol.restricted.iter().step_by(stride).map(|p| [p.cost, p.eta0]).collect(),
        envelope: sol.envelope.vertices.iter().map(|v| [v.cost, v.eta]).collect(),
        c_star: sol.cost,
        s_star: sol.s_star,
        eta: sol.eta,
        payoff: sol.payoff,
    })
}

/// Power-family optimum and how it moves with the cost weight.
pub fn statics_report(n: usize, m: usize, alpha: f64, gamma: f64, eps: f64, lambda: f64) -> Result<StaticsReport, String> {
    let family = PowerFamily::new(alpha, gamma, eps).map_err(|e| e.to_string())?;
    let config = ContestConfig::new(n, m, lambda).map_err(|e| e.to_string())?;
    let star = s_star_relaxed(&family, &config);
    let s_max = if m == 1 { Some(s_max_single_prize(&family, &config).map_err(|e| e.to_string())?) } else { None };
    let lambda_path = (0..=50)
        .map(|i| {
            let l = 0.1 * i as f64;
            [l, s_star_relaxed(&family, &ContestConfig { lambda: l, ..config }).clamped]
        })
        .collect();
    Ok(StaticsReport {
        s_star_raw: star.raw,
        s_star: star.clamped,
        s_max,
        s_opt: s_max.map_or(star.clamped, |hi| star.raw.clamp(0.0, hi)),
        lambda_path,
    })
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsValue> {
    result.and_then(|r| serde_json::to_string(&r).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn phi_curves(n: usize, m: usize, alpha: f64, slope: f64, intercept: f64, grid: usize) -> Result<String, JsValue> {
    to_js(phi_report(n, m, alpha, slope, intercept, grid))
}

#[wasm_bindgen]
pub fn optimal_design(n: usize, m: usize, alpha: f64, slope: f64, intercept: f64, lambda: f64) -> Result<String, JsValue> {
    to_js(envelope_report(n, m, alpha, slope, intercept, lambda))
}

#[wasm_bindgen]
pub fn power_statics(n: usize, m: usize, alpha: f64, gamma: f64, eps: f64, lambda: f64) -> Result<String, JsValue> {
    to_js(statics_report(n, m, alpha, gamma, eps, lambda))
}
