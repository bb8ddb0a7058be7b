//! Command-line front end: single solves, measurement sweeps,
//! phase-transition grids, theory diagnostics, and plot rendering.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use icra::analysis::{self, Surrogate};
use icra::error::{Error, Result};
use icra::harness::{self, Algo, PhaseConfig, Problem, ProblemSpec, SweepConfig};
use icra::nnm::SplitSolverConfig;
use icra::operators::MeasurementOperator;
use icra::seeding;
use icra::solver::{self, IcraConfig, SolveReport};
use icra::ua::{self, Delta, UaFamily};

#[derive(Parser)]
#[command(
    name = "icra",
    version,
    about = "Low-rank matrix recovery: concave-surrogate continuation solver, \
             baselines, experiments, and theory diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one random instance and write the full report as JSON.
    Solve(SolveArgs),
    /// Run a measurement sweep from a TOML config; writes CSV + summary JSON.
    Sweep(SweepArgs),
    /// Run a phase-transition grid from a TOML config; writes CSV.
    Phase(PhaseArgs),
    /// Estimate theory quantities for a sampled operator; writes JSON.
    Analyze(AnalyzeArgs),
    /// Render SVG figures from a results CSV.
    Plot(PlotArgs),
}

#[derive(Copy, Clone, ValueEnum)]
enum ProblemArg {
    Mc,
    Arm,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::Mc => Problem::Mc,
            ProblemArg::Arm => Problem::Arm,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum AlgoArg {
    Icra,
    Nnm,
    Lgd,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Icra => Algo::Icra,
            AlgoArg::Nnm => Algo::Nnm,
            AlgoArg::Lgd => Algo::Lgd,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    problem: ProblemArg,
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long)]
    rank: usize,
    #[arg(long)]
    m: usize,
    /// Instance seed; ground truth and operator derive from it, so any CSV
    /// row is reproducible from its seed column.
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum)]
    algo: AlgoArg,
    /// Smoothing decay factor of the continuation.
    #[arg(long, default_value_t = 0.2)]
    c: f64,
    /// Outer (continuation) stopping threshold.
    #[arg(long, default_value_t = 1e-2)]
    eps1: f64,
    /// Inner (surrogate-descent) stopping threshold.
    #[arg(long, default_value_t = 1e-2)]
    eps2: f64,
    /// Log-det regularization shift (lgd only).
    #[arg(long, default_value_t = solver::DEFAULT_LGD_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Full-scale protocol: 100 trials per cell (multi-hour runtime).
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Full-scale protocol: 50 trials per cell, every rank, dense
    /// measurement grid (multi-hour runtime).
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum AnalyzeKind {
    /// Sampled null-space quotients per rank.
    Theta,
    /// Sampled spherical-section constant.
    Spherical,
    /// Closeness bounds for the smoothed solution from the sampled constant.
    Prop4,
    /// Numeric audit of the surrogate-family property clauses.
    Properties,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(value_enum)]
    kind: AnalyzeKind,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long = "in", value_name = "CSV")]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

fn default_samples() -> usize {
    10_000
}

fn default_family() -> UaFamily {
    UaFamily::Exponential
}

fn default_theta_delta() -> f64 {
    1.0
}

fn default_delta_list() -> Vec<f64> {
    vec![1.0, 1e-1, 1e-2]
}

/// Operator and sampling settings for `analyze`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalyzeConfig {
    problem: Problem,
    n1: usize,
    n2: usize,
    m: usize,
    #[serde(default)]
    op_seed: u64,
    /// Ranks for the quotient estimates; default all `1..=min(n1,n2)`.
    #[serde(default)]
    r_list: Option<Vec<usize>>,
    #[serde(default = "default_samples")]
    n_samples: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_family")]
    family: UaFamily,
    /// Smoothing scale of the surrogate used in the quotient estimates.
    #[serde(default = "default_theta_delta")]
    theta_delta: f64,
    /// Smoothing scales for the closeness bounds.
    #[serde(default = "default_delta_list")]
    delta_list: Vec<f64>,
}

#[derive(Serialize)]
struct AnalyzeOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<BTreeMap<usize, analysis::ThetaEstimate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_estimate: Option<analysis::SphericalEstimate>,
    /// Bound per smoothing scale; `null` where the sampled constant
    /// collapses the denominator.
    #[serde(skip_serializing_if = "Option::is_none")]
    prop4_bounds: Option<BTreeMap<String, Option<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    properties: Option<ua::PropertyReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

#[derive(Serialize)]
struct SolveOutput {
    spec: ProblemSpec,
    algo: Algo,
    snr_db: f64,
    report: SolveReport,
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Contract(format!("JSON encoding failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Worker cap: `ICRA_THREADS` wins over the config field; unset means the
/// default pool.
fn apply_threads(cfg_threads: Option<usize>) {
    let n = std::env::var("ICRA_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .or(cfg_threads);
    if let Some(n) = n.filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn gen_instance(
    spec: &ProblemSpec,
) -> Result<(icra::DenseMatrix, MeasurementOperator, nalgebra::DVector<f64>)> {
    let x = harness::gen_low_rank(spec.n1, spec.n2, spec.r, seeding::child_seed(spec.seed, &[0]))?;
    let op = harness::gen_operator(
        spec.problem,
        spec.n1,
        spec.n2,
        spec.m,
        seeding::child_seed(spec.seed, &[1]),
    )?;
    let b = op.apply(&x)?;
    Ok((x, op, b))
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let spec = ProblemSpec {
        problem: args.problem.into(),
        n1: args.n1,
        n2: args.n2,
        r: args.rank,
        m: args.m,
        seed: args.seed,
    };
    spec.validate()?;
    let (x_true, op, b) = gen_instance(&spec)?;
    let split = SplitSolverConfig::default();
    let algo: Algo = args.algo.into();
    let report = match algo {
        Algo::Icra => {
            let cfg = IcraConfig {
                c: args.c,
                eps1: args.eps1,
                eps2: args.eps2,
                ..IcraConfig::default()
            };
            solver::icra_solve(&op, &b, &cfg)?
        }
        Algo::Nnm => solver::nnm_solve_report(&op, &b, &split)?,
        Algo::Lgd => solver::lgd_solve(
            &op,
            &b,
            args.alpha,
            solver::DEFAULT_LGD_TOL,
            solver::DEFAULT_LGD_MAX_ITERS,
            &split,
        )?,
    };
    let snr_db = harness::snr_rec(&x_true, &report.x_hat)?;
    println!(
        "{} {} {}x{} r={} m={} seed={}: snr {:.2} dB, outer {}, inner {}, {} ms",
        algo.label(),
        spec.problem.label(),
        spec.n1,
        spec.n2,
        spec.r,
        spec.m,
        spec.seed,
        snr_db,
        report.outer_iters,
        report.inner_total(),
        report.wall_ms
    );
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    write_json(
        &args.out,
        &SolveOutput {
            spec,
            algo,
            snr_db,
            report,
        },
    )
}

fn summary_path(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    out.with_file_name(format!("{name}.summary.json"))
}

fn run_sweep_cmd(args: SweepArgs) -> Result<()> {
    let mut cfg: SweepConfig = load_toml(&args.config)?;
    if args.paper_scale {
        cfg.trials = 100;
    }
    apply_threads(cfg.threads);
    let out = harness::run_sweep(&cfg)?;
    harness::write_csv(&args.out, &out.rows)?;
    write_json(&summary_path(&args.out), &out.summary)?;
    for cell in &out.summary.cells {
        println!(
            "{} r={} m={} (m/d_r {:.2}): rate {:.2}, mean snr {:.1} dB, mean inner {:.1}",
            cell.algo.label(),
            cell.r,
            cell.m,
            cell.m_over_dr,
            cell.success_rate,
            cell.mean_snr_db,
            cell.mean_inner_total
        );
    }
    for f in &out.summary.failures {
        eprintln!("solver failure: {f}");
    }
    for f in &out.summary.monotonicity_flags {
        eprintln!("monotonicity flag: {f}");
    }
    println!(
        "wrote {} rows to {}",
        out.rows.len(),
        args.out.display()
    );
    Ok(())
}

fn run_phase_cmd(args: PhaseArgs) -> Result<()> {
    let mut cfg: PhaseConfig = load_toml(&args.config)?;
    if args.paper_scale {
        cfg.trials = 50;
        cfg.r_list = None;
        cfg.m_per_r = cfg.m_per_r.max(15);
    }
    apply_threads(cfg.threads);
    let out = harness::run_phase_transition(&cfg)?;
    harness::write_csv(&args.out, &out.rows)?;
    for f in &out.failures {
        eprintln!("solver failure: {f}");
    }
    println!(
        "wrote {} rows ({} cells x {} trials x {} checkpoints) to {}",
        out.rows.len(),
        cfg.cells().len(),
        cfg.trials,
        cfg.checkpoints + 1,
        args.out.display()
    );
    Ok(())
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let cfg: AnalyzeConfig = load_toml(&args.config)?;
    let op = harness::gen_operator(cfg.problem, cfg.n1, cfg.n2, cfg.m, cfg.op_seed)?;
    let mut out = AnalyzeOutput {
        theta: None,
        delta_estimate: None,
        prop4_bounds: None,
        properties: None,
        notes: Vec::new(),
    };
    match args.kind {
        AnalyzeKind::Theta => {
            let surrogate = Surrogate::Ua {
                family: cfg.family,
                delta: Delta::new(cfg.theta_delta)?,
            };
            let ranks = cfg
                .r_list
                .clone()
                .unwrap_or_else(|| (1..=cfg.n1.min(cfg.n2)).collect());
            let mut map = BTreeMap::new();
            for r in ranks {
                map.insert(r, analysis::estimate_theta(&op, r, surrogate, cfg.n_samples, cfg.seed)?);
            }
            out.theta = Some(map);
            out.notes.push(
                "sampled maxima are lower bounds on the true quotient suprema".into(),
            );
        }
        AnalyzeKind::Spherical => {
            out.delta_estimate =
                Some(analysis::estimate_spherical_constant(&op, cfg.n_samples, cfg.seed)?);
            out.notes
                .push("sampled minimum is an upper bound on the true constant".into());
        }
        AnalyzeKind::Prop4 => {
            let est = analysis::estimate_spherical_constant(&op, cfg.n_samples, cfg.seed)?;
            let n = cfg.n1.min(cfg.n2);
            let mut bounds = BTreeMap::new();
            for &d in &cfg.delta_list {
                let delta = Delta::new(d)?;
                match analysis::prop4_bound(est.min_ratio, n, delta, cfg.family) {
                    Ok(b) => {
                        bounds.insert(format!("{d:e}"), Some(b));
                    }
                    Err(Error::UndefinedBound(msg)) => {
                        bounds.insert(format!("{d:e}"), None);
                        out.notes.push(msg);
                    }
                    Err(e) => return Err(e),
                }
            }
            out.delta_estimate = Some(est);
            out.prop4_bounds = Some(bounds);
            out.notes.push(
                "bounds use the sampled constant; the true constant can only tighten them".into(),
            );
        }
        AnalyzeKind::Properties => {
            let grid = ua::default_property_grid();
            out.properties = Some(ua::verify_property1(cfg.family, &grid)?);
            out.notes
                .push(format!("audited on a {}-point grid", grid.len()));
        }
    }
    write_json(&args.out, &out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_plot(args: PlotArgs) -> Result<()> {
    let written = harness::emit_plots(&args.input, &args.out_dir)?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// 1: bad configuration or arguments; 2: solver or I/O infrastructure.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::Domain(_)
        | Error::DimensionMismatch(_)
        | Error::TrivialNullSpace => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Solve(args) => run_solve(args),
        Cmd::Sweep(args) => run_sweep_cmd(args),
        Cmd::Phase(args) => run_phase_cmd(args),
        Cmd::Analyze(args) => run_analyze(args),
        Cmd::Plot(args) => run_plot(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let _ = e.print();
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
