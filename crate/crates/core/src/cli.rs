//! `csad` command-line interface.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical failure
//! (non-convergence included). Every command validates its arguments and
//! reads its inputs before anything is written.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{CsadError, Result};
use crate::estimator::{self, AdmmConfig};
use crate::evaluation::{self, lambda_grid, lambda_sweep, SweepOptions, DEFAULT_EDGE_THRESHOLD};
use crate::io;
use crate::monitor::{self, fit_background, run_monitor, MonitorConfig};
use crate::numerics::SymMatrix;
use crate::simulator::{make_scenario, GgmScenario, ScenarioMetadata};
use crate::{with_workers, Dataset};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Background penalty used when a command has to fit Θ_b itself.
pub const DEFAULT_LAMBDA_B: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "csad", version, about = "Contrastive structured anomaly detection for Gaussian graphical models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a background/foreground scenario and sample both datasets.
    Simulate(SimulateArgs),
    /// Run one ADMM solve on a dataset.
    Estimate(EstimateArgs),
    /// Score CSAD and BSAD over a λ grid on a simulated scenario.
    Sweep(SweepArgs),
    /// Slide a window over a stream and report structural changes.
    Monitor(MonitorArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads (default: available processors).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = estimator::DEFAULT_RHO)]
    pub rho: f64,
    #[arg(long, default_value_t = estimator::DEFAULT_EPS_ABS)]
    pub eps_abs: f64,
    #[arg(long, default_value_t = estimator::DEFAULT_EPS_REL)]
    pub eps_rel: f64,
    #[arg(long, default_value_t = estimator::DEFAULT_MAX_ITERATIONS)]
    pub max_iters: usize,
    /// Center the data before forming covariances.
    #[arg(long)]
    pub center: bool,
}

impl SolverArgs {
    fn admm(&self, lambda: f64) -> AdmmConfig {
        AdmmConfig {
            lambda,
            rho: self.rho,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            max_iterations: self.max_iters,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 0.02)]
    pub bg_density: f64,
    #[arg(long, default_value_t = 0.02)]
    pub delta_density: f64,
    /// Samples per dataset.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Observations CSV, one row per datapoint.
    #[arg(long)]
    pub data: PathBuf,
    /// Background precision CSV; omitted means Θ_b = 0 (plain graphical lasso).
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[arg(long, default_value_t = estimator::DEFAULT_LAMBDA)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Directory written by `simulate`.
    #[arg(long)]
    pub scenario_dir: PathBuf,
    /// Prebuilt Θ_b CSV; otherwise Θ_b is fitted from background.csv.
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_B)]
    pub lambda_b: f64,
    /// Explicit grid, comma separated. Overrides the range flags.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.01)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 10)]
    pub lambda_count: usize,
    /// Space the range grid linearly instead of geometrically.
    #[arg(long)]
    pub linear_grid: bool,
    #[arg(long, default_value_t = DEFAULT_EDGE_THRESHOLD)]
    pub edge_threshold: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Observations to monitor, one row per datapoint, in arrival order.
    #[arg(long)]
    pub stream: PathBuf,
    /// Prebuilt Θ_b CSV; skips the background fit.
    #[arg(long)]
    pub background: Option<PathBuf>,
    /// Anomaly-free history used to fit Θ_b when --background is absent.
    #[arg(long)]
    pub background_data: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_B)]
    pub lambda_b: f64,
    #[arg(long, default_value_t = estimator::DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = monitor::DEFAULT_WINDOW_SIZE)]
    pub window_size: usize,
    /// Defaults to the window size (non-overlapping windows).
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_EDGE_THRESHOLD)]
    pub edge_threshold: f64,
    #[arg(long, default_value_t = monitor::DEFAULT_FLAG_MIN_EDGES)]
    pub flag_min_edges: usize,
}

/// Parses `std::env::args` and runs the command; returns the exit code.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Monitor(a) => cmd_monitor(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &CsadError) -> i32 {
    match e {
        CsadError::NotConverged { .. }
        | CsadError::EigenFailure
        | CsadError::NotPositiveDefinite { .. }
        | CsadError::Singular { .. } => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

fn invalid(msg: impl Into<String>) -> CsadError {
    CsadError::InvalidConfig(msg.into())
}

fn check_workers(common: &CommonArgs) -> Result<()> {
    if common.workers == Some(0) {
        return Err(invalid("--workers must be >= 1"));
    }
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| invalid(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write_text(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateMeta<'a> {
    command: &'static str,
    config: &'a SimulateArgs,
    #[serde(flatten)]
    scenario: ScenarioMetadata,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    check_workers(&args.common)?;
    if args.n == 0 {
        return Err(invalid("--n must be >= 1"));
    }
    if args.p < 2 {
        return Err(invalid("--p must be >= 2"));
    }
    for (flag, d) in [("--bg-density", args.bg_density), ("--delta-density", args.delta_density)] {
        if !(0.0..=1.0).contains(&d) {
            return Err(invalid(format!("{flag} must lie in [0, 1]")));
        }
    }

    let scenario = make_scenario(args.p, args.bg_density, args.delta_density, args.common.seed)?;
    let (background, foreground) = with_workers(args.common.workers, || {
        rayon::join(|| scenario.sample_background(args.n), || scenario.sample_foreground(args.n))
    })?;
    let (background, foreground) = (background?, foreground?);

    let dir = &args.common.out_dir;
    prepare_out_dir(dir)?;
    io::write_sym_matrix(&dir.join("p_b.csv"), &scenario.p_b)?;
    io::write_sym_matrix(&dir.join("p_delta.csv"), &scenario.p_delta)?;
    io::write_sym_matrix(&dir.join("p_f.csv"), &scenario.p_f)?;
    io::write_dataset(&dir.join("background.csv"), &background)?;
    io::write_dataset(&dir.join("foreground.csv"), &foreground)?;
    io::write_json(
        &dir.join("scenario.json"),
        &SimulateMeta {
            command: "simulate",
            config: args,
            scenario: scenario.metadata(),
        },
    )?;
    println!(
        "simulated p={} with {} change edges into {}",
        scenario.p,
        scenario.true_change_edges.len(),
        dir.display()
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EstimateMeta<'a> {
    command: &'static str,
    config: &'a EstimateArgs,
    admm: AdmmConfig,
    p: usize,
    n: usize,
    iterations: usize,
    converged: bool,
    final_residuals: Option<estimator::ResidualPoint>,
    z_nonzero_offdiag_pairs: usize,
}

fn read_background(path: Option<&Path>, p: usize) -> Result<SymMatrix> {
    match path {
        None => Ok(SymMatrix::zeros(p)),
        Some(path) => {
            let tb = io::read_sym_matrix(path)?;
            if tb.dim() != p {
                return Err(CsadError::DimensionMismatch {
                    expected: p,
                    found: tb.dim(),
                });
            }
            Ok(tb)
        }
    }
}

fn read_nonempty_dataset(path: &Path) -> Result<Dataset> {
    let d = io::read_dataset(path)?;
    if d.is_empty() {
        return Err(invalid(format!("{} holds no observations", path.display())));
    }
    Ok(d)
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<i32> {
    check_workers(&args.common)?;
    let admm = args.solver.admm(args.lambda);
    admm.validate()?;
    let data = read_nonempty_dataset(&args.data)?;
    let theta_b = read_background(args.background.as_deref(), data.n_cols())?;

    let s = estimator::empirical_covariance(&data, args.solver.center)?;
    let report = estimator::solve(&s, &theta_b, &admm)?;

    let dir = &args.common.out_dir;
    prepare_out_dir(dir)?;
    io::write_sym_matrix(&dir.join("z.csv"), &report.z_hat)?;
    io::write_sym_matrix(&dir.join("theta.csv"), &report.theta_hat)?;
    write_text(&dir.join("trace.csv"), |b| io::write_trace_csv(b, &report.residual_trace))?;
    io::write_json(
        &dir.join("report.json"),
        &EstimateMeta {
            command: "estimate",
            config: args,
            admm,
            p: data.n_cols(),
            n: data.n_rows(),
            iterations: report.iterations,
            converged: report.converged,
            final_residuals: report.final_residuals().copied(),
            z_nonzero_offdiag_pairs: evaluation::edge_set(&(&report.z_hat - &theta_b), 0.0).len(),
        },
    )?;
    println!(
        "{} after {} iterations",
        if report.converged { "converged" } else { "NOT converged" },
        report.iterations
    );
    Ok(if report.converged { EXIT_OK } else { EXIT_NUMERIC })
}

#[derive(Serialize)]
struct SweepMeta<'a> {
    command: &'static str,
    config: &'a SweepArgs,
    admm: AdmmConfig,
    grid: &'a [f64],
    theta_b_source: String,
    true_change_edges: usize,
    records: &'a [evaluation::SweepRecord],
}

fn read_scenario(dir: &Path) -> Result<(ScenarioMetadata, SymMatrix, SymMatrix, SymMatrix)> {
    let meta: ScenarioMetadata = serde_json::from_slice(&fs::read(dir.join("scenario.json"))?)?;
    let p_b = io::read_sym_matrix(&dir.join("p_b.csv"))?;
    let p_delta = io::read_sym_matrix(&dir.join("p_delta.csv"))?;
    let p_f = io::read_sym_matrix(&dir.join("p_f.csv"))?;
    for m in [&p_b, &p_delta, &p_f] {
        if m.dim() != meta.p {
            return Err(CsadError::DimensionMismatch {
                expected: meta.p,
                found: m.dim(),
            });
        }
    }
    Ok((meta, p_b, p_delta, p_f))
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    check_workers(&args.common)?;
    let admm = args.solver.admm(0.0);
    admm.validate()?;
    if args.edge_threshold.is_nan() || args.edge_threshold < 0.0 {
        return Err(invalid("--edge-threshold must be >= 0"));
    }
    let grid = match &args.lambdas {
        Some(list) if list.is_empty() => return Err(invalid("--lambdas is empty")),
        Some(list) => {
            if let Some(bad) = list.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
                return Err(invalid(format!("invalid lambda {bad}")));
            }
            list.clone()
        }
        None => lambda_grid(args.lambda_min, args.lambda_max, args.lambda_count, !args.linear_grid)?,
    };
    if args.background.is_none() && !(args.lambda_b >= 0.0 && args.lambda_b.is_finite()) {
        return Err(invalid("--lambda-b must be finite and >= 0"));
    }

    let dir = &args.scenario_dir;
    let (meta, p_b, p_delta, p_f) = read_scenario(dir)?;
    let foreground = read_nonempty_dataset(&dir.join("foreground.csv"))?;
    if foreground.n_cols() != meta.p {
        return Err(CsadError::DimensionMismatch {
            expected: meta.p,
            found: foreground.n_cols(),
        });
    }
    let scenario = GgmScenario {
        p: meta.p,
        p_b,
        p_delta,
        p_f,
        true_change_edges: meta.true_change_edges.clone(),
        seed: meta.seed,
        bg_density: meta.bg_density,
        delta_density: meta.delta_density,
    };
    let (theta_b, source) = match &args.background {
        Some(path) => (read_background(Some(path), meta.p)?, path.display().to_string()),
        None => {
            let bg = read_nonempty_dataset(&dir.join("background.csv"))?;
            let tb = fit_background(&bg, args.lambda_b, &admm, args.solver.center)?;
            (tb, format!("fitted from background.csv at lambda_b={}", args.lambda_b))
        }
    };

    let options = SweepOptions {
        edge_threshold: args.edge_threshold,
        center: args.solver.center,
    };
    let records = with_workers(args.common.workers, || {
        lambda_sweep(&scenario, &foreground, &theta_b, &grid, &admm, &options)
    })??;

    let out = &args.common.out_dir;
    prepare_out_dir(out)?;
    write_text(&out.join("sweep.csv"), |b| io::write_sweep_csv(b, &records))?;
    if args.background.is_none() {
        io::write_sym_matrix(&out.join("theta_b.csv"), &theta_b)?;
    }
    io::write_json(
        &out.join("sweep.json"),
        &SweepMeta {
            command: "sweep",
            config: args,
            admm,
            grid: &grid,
            theta_b_source: source,
            true_change_edges: scenario.true_change_edges.len(),
            records: &records,
        },
    )?;

    println!("{:>12} {:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>6} {:>5}", "lambda", "method", "tp", "fp", "fn", "precision", "recall", "iters", "conv");
    for r in &records {
        println!(
            "{:>12.6} {:>6} {:>6} {:>6} {:>6} {:>9.4} {:>9.4} {:>6} {:>5}",
            r.lambda,
            r.method.to_string(),
            r.tp,
            r.fp,
            r.fn_,
            r.precision,
            r.recall,
            r.iterations,
            r.converged
        );
    }
    let unconverged = records.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} sweep cells did not converge");
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct MonitorMeta<'a> {
    command: &'static str,
    config: &'a MonitorArgs,
    monitor: MonitorConfig,
    theta_b_source: String,
    windows: usize,
    flagged_windows: Vec<usize>,
}

pub fn cmd_monitor(args: &MonitorArgs) -> Result<i32> {
    check_workers(&args.common)?;
    let config = MonitorConfig {
        window_size: args.window_size,
        stride: args.stride.unwrap_or(args.window_size),
        lambda: args.lambda,
        admm: args.solver.admm(args.lambda),
        edge_threshold: args.edge_threshold,
        flag_min_edges: args.flag_min_edges,
        center: args.solver.center,
    };
    config.validate()?;
    if args.background.is_none() && args.background_data.is_none() {
        return Err(invalid("one of --background or --background-data is required"));
    }

    let stream = read_nonempty_dataset(&args.stream)?;
    if stream.n_rows() < config.window_size {
        return Err(invalid(format!(
            "stream has {} rows, fewer than --window-size {}",
            stream.n_rows(),
            config.window_size
        )));
    }
    let p = stream.n_cols();
    let (theta_b, source) = match (&args.background, &args.background_data) {
        (Some(path), _) => (read_background(Some(path), p)?, path.display().to_string()),
        (None, Some(path)) => {
            let bg = read_nonempty_dataset(path)?;
            if bg.n_cols() != p {
                return Err(CsadError::DimensionMismatch {
                    expected: p,
                    found: bg.n_cols(),
                });
            }
            let tb = fit_background(&bg, args.lambda_b, &config.admm, config.center)?;
            (tb, format!("fitted from {} at lambda_b={}", path.display(), args.lambda_b))
        }
        (None, None) => unreachable!("checked above"),
    };

    let reports = with_workers(args.common.workers, || run_monitor(&stream, &theta_b, &config))??;

    let out = &args.common.out_dir;
    prepare_out_dir(out)?;
    write_text(&out.join("windows.jsonl"), |b| io::write_window_jsonl(b, &reports))?;
    write_text(&out.join("windows.csv"), |b| io::write_window_summary_csv(b, &reports))?;
    if args.background.is_none() {
        io::write_sym_matrix(&out.join("theta_b.csv"), &theta_b)?;
    }
    let flagged_windows: Vec<usize> = reports.iter().filter(|r| r.flagged).map(|r| r.window_index).collect();
    println!("{} windows, {} flagged", reports.len(), flagged_windows.len());
    io::write_json(
        &out.join("monitor.json"),
        &MonitorMeta {
            command: "monitor",
            config: args,
            monitor: config,
            theta_b_source: source,
            windows: reports.len(),
            flagged_windows,
        },
    )?;
    Ok(EXIT_OK)
}
