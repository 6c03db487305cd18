//! `contestlab` command-line interface. [`dispatch`] parses arguments, runs
//! one subcommand and writes its artifacts; the binary is a thin wrapper.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use contestlab::equilibrium::{find_equilibria, interim_allocation, phi, ScanOptions};
use contestlab::feasible::{feasible_set, feasible_set_default, quota_parameter, synthesize_mechanism, FeasibleSet};
use contestlab::optimal::{solve, solve_frontier, ConcaveEnvelope, OptimizeOptions, RestrictedPoint};
use contestlab::outcome::{budget_derivative, CostParametrized, FrontierCurve};
use contestlab::simulate::{deviation_audit, probe_grid, run as simulate_run};
use contestlab::statics::{sweep, PowerFamily, SweepRange};
use contestlab::{AllocationVector, ContestConfig, Instance};

mod error;
mod load;
mod output;

pub use error::{CliError, CliResult};
pub use load::{load_config, parse_mechanism};
pub use output::{f17, RunManifest};

use output::{config_hash, json, Artifacts, Table};

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "CONTESTLAB_SEED";

#[derive(Parser, Debug)]
#[command(name = "contestlab", version, about = "Equilibria, feasible sets and optimal design of selective contests")]
struct Cli {
    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Also write a run manifest (command, config hash, seed, outputs) here.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct ScanArgs {
    /// Cells scanned for sign changes of the deviation incentive.
    #[arg(long, default_value_t = 2048)]
    scan_grid: usize,
    /// Bisection tolerance on cutoffs.
    #[arg(long, default_value_t = 1e-10)]
    root_tol: f64,
    /// Tolerance for boundary and tangency classification.
    #[arg(long, default_value_t = 1e-9)]
    class_tol: f64,
}

impl ScanArgs {
    fn options(&self) -> CliResult<ScanOptions> {
        if self.scan_grid < 2 {
            return Err(CliError::Usage("--scan-grid must be at least 2".into()));
        }
        if !(self.root_tol >= 0.0 && self.class_tol >= 0.0) {
            return Err(CliError::Usage("tolerances must be non-negative".into()));
        }
        Ok(ScanOptions { grid: self.scan_grid, root_tol: self.root_tol, class_tol: self.class_tol })
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deviation incentive of the marginal type, sampled over cutoffs (CSV) or at one cutoff (JSON).
    Phi {
        #[arg(long)]
        config: PathBuf,
        /// Mechanism: standard, reversed, random, quota:t, quota-relaxed:t, blind:t, segment:t or custom:v1,...
        #[arg(long, default_value = "standard")]
        v: String,
        #[arg(long, default_value_t = 1001)]
        grid: usize,
        /// Evaluate at a single cutoff instead of a grid.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// All symmetric equilibrium cutoffs of a mechanism (JSON).
    Equilibria {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "standard")]
        v: String,
        #[command(flatten)]
        scan: ScanArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cutoffs inducible by some admissible mechanism (JSON).
    Feasible {
        #[arg(long)]
        config: PathBuf,
        /// Lower mechanism bound (default: reversed).
        #[arg(long)]
        vmin: Option<String>,
        /// Upper mechanism bound (default: standard).
        #[arg(long)]
        vmax: Option<String>,
        #[command(flatten)]
        scan: ScanArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cost-efficiency frontier with columns s,C,eta,dEta_dC (CSV).
    Curve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 2048)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal cutoff for the principal (JSON).
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's cost weight.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        /// Family used to implement the optimum: quota, quota-relaxed, blind or segment.
        #[arg(long)]
        family: Option<String>,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        /// Write the concave envelope vertices (CSV: C,eta,s,slope).
        #[arg(long)]
        envelope: Option<PathBuf>,
        #[command(flatten)]
        scan: ScanArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Member of a mechanism family inducing a target cutoff (JSON).
    Mechanism {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value = "blind")]
        family: String,
        #[command(flatten)]
        scan: ScanArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo play of a contest (JSON), optionally with a deviation audit (CSV).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "standard")]
        v: String,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        /// Seed; falls back to CONTESTLAB_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Write a per-type deviation table here.
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Probe types in the audit, evenly spaced on [0, 1].
        #[arg(long, default_value_t = 101)]
        probes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Power-family comparative statics over one parameter (CSV).
    Sweep {
        /// Base point, e.g. alpha=1,gamma=0.5,eps=1.
        #[arg(long, default_value = "alpha=1,gamma=1,eps=1")]
        family: String,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Swept parameter as name:lo:hi[:points]; name is alpha, gamma, eps, lambda or m.
        #[arg(long)]
        over: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deviation incentives and feasible set of the two-interval example.
    #[command(name = "reproduce-fig1")]
    ReproduceFig1 {
        #[arg(long, default_value = "fig1")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1001)]
        grid: usize,
    },
    /// Concave envelope of a quintic frontier with an infeasible cost gap.
    #[command(name = "reproduce-fig2")]
    ReproduceFig2 {
        #[arg(long, default_value = "fig2")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
    },
}

/// Runs the command line `args` (including the program name). Returns the
/// process exit code: 0 on success, 1 for invalid input, 2 for numerical
/// failure.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return 0;
                }
                _ => 1,
            };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    if cli.threads > 0 {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match execute(cli).and_then(|a| a.commit(out)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult<Artifacts> {
    let mut art = Artifacts::default();
    let (name, hash, seed) = match cli.command {
        Command::Phi { config, v, grid, s, out } => {
            let inst = load_config(&config)?;
            let mech = parse_mechanism(&v, &inst.config)?;
            match s {
                Some(s) => {
                    check_unit("s", s)?;
                    let q = interim_allocation(&mech, s, &inst);
                    let report = PhiPoint { s, phi: phi(s, &mech, &inst), q_high: q.q_high, q_low: q.q_low };
                    art.emit(out.as_deref(), json(&report));
                }
                None => {
                    let mut t = Table::new(&["s", "phi"]);
                    for s in unit_grid(grid)? {
                        t.floats(&[s, phi(s, &mech, &inst)]);
                    }
                    art.emit(out.as_deref(), t.finish());
                }
            }
            ("phi", config_hash(&(inst.to_spec(), mech.components(), grid, s)), None)
        }
        Command::Equilibria { config, v, scan, out } => {
            let inst = load_config(&config)?;
            let mech = parse_mechanism(&v, &inst.config)?;
            let eq = find_equilibria(&mech, &inst, &scan.options()?);
            art.emit(out.as_deref(), json(&eq));
            ("equilibria", config_hash(&(inst.to_spec(), mech.components())), None)
        }
        Command::Feasible { config, vmin, vmax, scan, out } => {
            let inst = load_config(&config)?;
            let opts = scan.options()?;
            let set = match (vmin, vmax) {
                (None, None) => feasible_set_default(&inst, &opts),
                (lo, hi) => {
                    let lo = match lo {
                        Some(t) => parse_mechanism(&t, &inst.config)?,
                        None => AllocationVector::reversed(&inst.config),
                    };
                    let hi = match hi {
                        Some(t) => parse_mechanism(&t, &inst.config)?,
                        None => AllocationVector::standard(&inst.config),
                    };
                    feasible_set(&lo, &hi, &inst, &opts)?
                }
            };
            art.emit(out.as_deref(), json(&set));
            ("feasible", config_hash(&inst.to_spec()), None)
        }
        Command::Curve { config, grid, out } => {
            let inst = load_config(&config)?;
            let curve = FrontierCurve::build(&inst, grid, &[])?;
            let mut t = Table::new(&["s", "C", "eta", "dEta_dC"]);
            for p in &curve.points {
                let slope = budget_derivative(p.s, &inst).map_or(f64::NAN, |b| b.value);
                t.floats(&[p.s, p.cost, p.eta, slope]);
            }
            art.emit(out.as_deref(), t.finish());
            ("curve", config_hash(&(inst.to_spec(), grid)), None)
        }
        Command::Optimize { config, lambda, family, grid, envelope, scan, out } => {
            let mut inst = load_config(&config)?;
            if let Some(l) = lambda {
                inst.config.lambda = l;
                inst.config.validate()?;
            }
            let fam = family.as_deref().map(|f| load::family(f, &inst.config)).transpose()?;
            let opts = OptimizeOptions { frontier_grid: grid, scan: scan.options()? };
            let sol = solve(&inst, fam.as_ref(), &opts)?;
            let feasible = feasible_set_default(&inst, &opts.scan);
            let report = OptimizeReport {
                lambda: inst.config.lambda,
                c_star: sol.cost,
                s_star: sol.s_star,
                eta: sol.eta,
                payoff: sol.payoff,
                envelope_gap: sol.envelope_gap(),
                feasible: feasible.intervals.clone(),
                mechanism: match (&fam, &sol.mechanism) {
                    (Some(f), Some(h)) => Some(MechanismReport::new(h.family.clone(), sol.s_star, h.t, &f.at(h.t), &inst, &opts.scan)),
                    _ => None,
                },
            };
            if let Some(path) = envelope {
                art.file(path, envelope_csv(&sol.envelope));
            }
            art.emit(out.as_deref(), json(&report));
            ("optimize", config_hash(&(inst.to_spec(), family, grid)), None)
        }
        Command::Mechanism { config, s, family, scan, out } => {
            let inst = load_config(&config)?;
            check_unit("s", s)?;
            let opts = scan.options()?;
            let fam = load::family(&family, &inst.config)?;
            let t = if fam.name() == "quota" {
                quota_parameter(s, &inst, fam.is_relaxed_quota())?
            } else {
                synthesize_mechanism(s, &fam, &inst, &opts)?
            };
            let report = MechanismReport::new(family.clone(), s, t, &fam.at(t), &inst, &opts);
            art.emit(out.as_deref(), json(&report));
            ("mechanism", config_hash(&(inst.to_spec(), family, s)), None)
        }
        Command::Simulate { config, v, s, trials, seed, audit, probes, out } => {
            let inst = load_config(&config)?;
            check_unit("s", s)?;
            let mech = parse_mechanism(&v, &inst.config)?;
            let seed = resolve_seed(seed)?;
            let report = simulate_run(&mech, s, &inst, trials, seed)?;
            if let Some(path) = audit {
                let table = deviation_audit(&mech, s, &inst, &probe_grid(probes), trials, seed)?;
                let mut t = Table::new(&["theta", "prescribed", "payoff_prescribed", "payoff_deviant", "gain", "gain_se"]);
                for r in &table.rows {
                    let act = if r.prescribed_high { "high" } else { "low" };
                    let mut row = vec![f17(r.theta), act.to_string()];
                    row.extend([r.payoff_prescribed, r.payoff_deviant, r.gain.mean, r.gain.se].map(f17));
                    t.row(row);
                }
                art.file(path, t.finish());
            }
            art.emit(out.as_deref(), json(&report));
            ("simulate", config_hash(&(inst.to_spec(), mech.components(), s, trials)), Some(seed))
        }
        Command::Sweep { family, n, m, lambda, over, out } => {
            let fam = parse_family(&family)?;
            let cfg = ContestConfig::new(n, m, lambda)?;
            let range: SweepRange = over.parse()?;
            let table = sweep(&fam, &cfg, &range)?;
            let mut t = Table::new(&[
                "value", "alpha", "gamma", "eps", "lambda", "n", "m", "s_star_raw", "s_star", "s_max", "s_opt", "C", "eta", "payoff",
            ]);
            for r in &table.rows {
                let mut row: Vec<String> = [r.value, r.alpha, r.gamma, r.eps, r.lambda].map(f17).to_vec();
                row.push(r.n.to_string());
                row.push(r.m.to_string());
                row.extend([r.s_star_raw, r.s_star].map(f17));
                row.push(r.s_max.map(f17).unwrap_or_default());
                row.extend([r.s_opt, r.cost, r.eta, r.payoff].map(f17));
                t.row(row);
            }
            let summary = SweepSummary {
                parameter: range.parameter.name(),
                expected: table.expected.to_string(),
                observed: table.observed.to_string(),
                matches: table.matches,
                turning_point: table.turning_point,
            };
            match out {
                Some(path) => {
                    art.file(path, t.finish());
                    art.print(json(&summary));
                }
                None => art.print(t.finish()),
            }
            ("sweep", config_hash(&(fam, cfg, range)), None)
        }
        Command::ReproduceFig1 { out_dir, grid } => {
            let inst = Instance::two_interval_example();
            let high = AllocationVector::standard(&inst.config);
            let low = AllocationVector::reversed(&inst.config);
            let mut t = Table::new(&["s", "phi_standard", "phi_reversed"]);
            for s in unit_grid(grid)? {
                t.floats(&[s, phi(s, &high, &inst), phi(s, &low, &inst)]);
            }
            let opts = ScanOptions::default();
            let summary = Fig1Summary {
                feasible: feasible_set_default(&inst, &opts).intervals,
                standard_equilibria: find_equilibria(&high, &inst, &opts).cutoffs(),
                reversed_equilibria: find_equilibria(&low, &inst, &opts).cutoffs(),
            };
            art.file(out_dir.join("phi.csv"), t.finish());
            art.file(out_dir.join("feasible.json"), json(&summary));
            art.manifest(out_dir.join("manifest.json"), "reproduce-fig1", config_hash(&(inst.to_spec(), grid)), None);
            art.print(json(&summary));
            ("reproduce-fig1", config_hash(&(inst.to_spec(), grid)), None)
        }
        Command::ReproduceFig2 { out_dir, lambda, grid } => {
            let gap = FeasibleSet { intervals: vec![[0.0, FIG2_GAP.0], [FIG2_GAP.1, 1.0]] };
            let sol = solve_frontier(&CostParametrized(fig2_frontier), &gap, lambda, grid)?;
            let mut t = Table::new(&["C", "eta", "eta0", "envelope"]);
            for p in &sol.restricted {
                t.floats(&[p.cost, p.eta, p.eta0, sol.envelope.value(p.cost).unwrap_or(f64::NAN)]);
            }
            let summary = Fig2Summary {
                lambda,
                c_star: sol.cost,
                payoff: sol.payoff,
                bridges: bridges(&sol.envelope, &sol.restricted),
            };
            art.file(out_dir.join("frontier.csv"), t.finish());
            art.file(out_dir.join("hull.csv"), envelope_csv(&sol.envelope));
            art.file(out_dir.join("summary.json"), json(&summary));
            art.manifest(out_dir.join("manifest.json"), "reproduce-fig2", config_hash(&(lambda, grid)), None);
            art.print(json(&summary));
            ("reproduce-fig2", config_hash(&(lambda, grid)), None)
        }
    };
    if let Some(path) = cli.manifest {
        art.manifest(path, name, hash, seed);
    }
    Ok(art)
}

/// `eta = 16C^5 - 55C^4 + 63C^3 - 30C^2 + 6C`, a frontier with two concave
/// humps.
pub fn fig2_frontier(c: f64) -> f64 {
    ((((16.0 * c - 55.0) * c + 63.0) * c - 30.0) * c + 6.0) * c
}

/// Costs in the open interval between these are infeasible in the Fig. 2 setup.
pub const FIG2_GAP: (f64, f64) = (0.05, 0.15);

#[derive(Serialize)]
struct PhiPoint {
    s: f64,
    phi: f64,
    q_high: f64,
    q_low: f64,
}

#[derive(Serialize)]
struct OptimizeReport {
    lambda: f64,
    #[serde(rename = "C_star")]
    c_star: f64,
    s_star: f64,
    eta: f64,
    payoff: f64,
    envelope_gap: f64,
    feasible: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mechanism: Option<MechanismReport>,
}

#[derive(Serialize)]
struct MechanismReport {
    family: String,
    s: f64,
    t: f64,
    v: Vec<f64>,
    /// Every equilibrium cutoff of the synthesized mechanism.
    equilibria: Vec<f64>,
}

impl MechanismReport {
    fn new(family: String, s: f64, t: f64, v: &AllocationVector, inst: &Instance, opts: &ScanOptions) -> Self {
        Self { family, s, t, v: v.components().to_vec(), equilibria: find_equilibria(v, inst, opts).cutoffs() }
    }
}

#[derive(Serialize)]
struct SweepSummary {
    parameter: &'static str,
    expected: String,
    observed: String,
    matches: bool,
    turning_point: Option<f64>,
}

#[derive(Serialize)]
struct Fig1Summary {
    feasible: Vec<[f64; 2]>,
    standard_equilibria: Vec<f64>,
    reversed_equilibria: Vec<f64>,
}

#[derive(Serialize)]
struct Bridge {
    from: f64,
    to: f64,
    slope: f64,
}

#[derive(Serialize)]
struct Fig2Summary {
    lambda: f64,
    #[serde(rename = "C_star")]
    c_star: f64,
    payoff: f64,
    bridges: Vec<Bridge>,
}

/// Envelope segments that skip over at least one frontier sample.
fn bridges(env: &ConcaveEnvelope, points: &[RestrictedPoint]) -> Vec<Bridge> {
    let index = |c: f64| points.partition_point(|p| p.cost < c);
    env.vertices
        .windows(2)
        .zip(&env.slopes)
        .filter(|(w, _)| index(w[1].cost) - index(w[0].cost) > 1)
        .map(|(w, &slope)| Bridge { from: w[0].cost, to: w[1].cost, slope })
        .collect()
}

fn envelope_csv(env: &ConcaveEnvelope) -> String {
    let mut t = Table::new(&["C", "eta", "s", "slope"]);
    for (i, v) in env.vertices.iter().enumerate() {
        let slope = env.slopes.get(i).map(|&x| f17(x)).unwrap_or_default();
        t.row([f17(v.cost), f17(v.eta), f17(v.s), slope]);
    }
    t.finish()
}

fn unit_grid(points: usize) -> CliResult<Vec<f64>> {
    if points < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    Ok((0..points).map(|i| i as f64 / (points - 1) as f64).collect())
}

fn check_unit(name: &str, x: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{name} must lie in [0, 1], got {x}")))
    }
}

fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{text}` is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// Parses `alpha=..,gamma=..,eps=..`; missing keys default to 1.
fn parse_family(text: &str) -> CliResult<PowerFamily> {
    let (mut alpha, mut gamma, mut eps) = (1.0, 1.0, 1.0);
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| CliError::Usage(format!("expected key=value, got `{part}`")))?;
        let value: f64 = value.trim().parse().map_err(|_| CliError::Usage(format!("`{value}` is not a number")))?;
        match key.trim() {
            "alpha" => alpha = value,
            "gamma" => gamma = value,
            "eps" | "epsilon" => eps = value,
            other => return Err(CliError::Usage(format!("unknown family parameter `{other}`"))),
        }
    }
    Ok(PowerFamily::new(alpha, gamma, eps)?)
}
