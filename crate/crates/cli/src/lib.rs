//! Command-line front end for the parity-meter entanglement simulator.
//!
//! Exit codes: 0 success, 1 validation failure or I/O error, 2 usage error,
//! 3 numerical divergence.

pub mod checks;
pub mod config;
pub mod manifest;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use entgen_core::ensemble::{genesis_histogram, run_ensemble};
use entgen_core::fpt::{predict, prediction_grid, write_grid_csv, DiagonalState, FptError};
use entgen_core::output::fmt_f64;
use entgen_core::projective::{average_concurrence, monte_carlo};
use entgen_core::trajectory::{simulate, Scheme};
use thiserror::Error;

use crate::checks::{render_table, run_suite, Suite};
use crate::config::{
    resolve_seed, ConfigFile, ResolvedSim, SimOverrides, DEFAULT_BIN_WIDTH, DEFAULT_N_MAX, DEFAULT_RUNS,
};
use crate::manifest::{write_outputs, Artifact, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ValidationFailed(_) | CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "entgen", version, about = "Entanglement genesis under a continuous parity meter")]
pub struct Cli {
    /// JSON config file (or a run manifest); flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads; results do not depend on it [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory and write trajectory.csv
    Trajectory(TrajectoryArgs),
    /// Simulate an ensemble: averaged Λ, genesis histogram, events
    Ensemble(EnsembleArgs),
    /// Analytic border-crossing prediction for a diagonal state, or a grid
    Predict(PredictArgs),
    /// Projective-measurement model: closed-form curve and optional Monte Carlo
    Projective(ProjectiveArgs),
    /// Run a validation suite and print a per-check table
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Kraus,
    EulerMaruyama,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Kraus => Scheme::Kraus,
            SchemeArg::EulerMaruyama => Scheme::EulerMaruyama,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Coupling ratio K = T_q/T_M [default: 0.3]
    #[arg(long)]
    pub k: Option<f64>,
    /// Tunnelling amplitude Δ; T_q = 2π/Δ, 0 for measurement only [default: 2π]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Time step in T_q, at most min(T_q, T_M)/100 [default: min(T_q, T_M)/200]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulated time in T_q [default: 10]
    #[arg(long)]
    pub duration: Option<f64>,
    /// Master seed [default: $PARITY_SEED, else 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial state: preset (mixed, bell-u1..bell-u4, sigma-boundary), four
    /// comma-separated Bell populations, or a state JSON file [default: mixed]
    #[arg(long)]
    pub state: Option<String>,
    /// Integrator [default: kraus]
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Record every N-th step [default: 1]
    #[arg(long)]
    pub stride: Option<usize>,
}

impl SimArgs {
    fn overrides(&self) -> SimOverrides {
        SimOverrides {
            k: self.k,
            delta: self.delta,
            dt: self.dt,
            duration: self.duration,
            seed: self.seed,
            scheme: self.scheme.map(Into::into),
            stride: self.stride,
            state: self.state.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Output directory
    #[arg(long, default_value = "out/trajectory")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Number of runs [default: 1000]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Genesis histogram bin width in T_q [default: 0.2]
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Output directory
    #[arg(long, default_value = "out/ensemble")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["state", "grid"]))]
pub struct PredictArgs {
    /// Diagonal populations ρ11,ρ22,ρ33,ρ44 in the Bell basis
    #[arg(long, value_name = "P11,P22,P33,P44")]
    pub state: Option<String>,
    /// Emit an N×N grid over (ρ33, ρ44) at ρ11 = ρ22 as CSV
    #[arg(long, value_name = "N")]
    pub grid: Option<usize>,
    /// Also write the result and a manifest to this directory [default: stdout only]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("angle").args(["k", "delta_angle"]))]
pub struct ProjectiveArgs {
    /// Coupling ratio K; sets δ = π/K and the time axis t = n/K [default: 30]
    #[arg(long)]
    pub k: Option<f64>,
    /// Rotation angle δ between measurements, in [0, π]
    #[arg(long)]
    pub delta_angle: Option<f64>,
    /// Number of measurements [default: 50]
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Monte Carlo runs; omit for the closed form only
    #[arg(long)]
    pub runs: Option<usize>,
    /// Master seed [default: $PARITY_SEED, else 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out/projective")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Fast,
    Full,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Suite size [default: fast]
    #[arg(long, value_enum)]
    pub suite: Option<SuiteArg>,
    /// Master seed [default: $PARITY_SEED, else 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out/validate")]
    pub out: PathBuf,
}

/// Parse arguments and run, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Trajectory(a) => cmd_trajectory(a, &file),
        Command::Ensemble(a) => cmd_ensemble(a, &file),
        Command::Predict(a) => cmd_predict(a),
        Command::Projective(a) => cmd_projective(a, &file),
        Command::Validate(a) => cmd_validate(a, &file),
    })
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn state_value(r: &ResolvedSim) -> serde_json::Value {
    serde_json::json!({ "spec": r.state_spec, "bell": r.state_json() })
}

fn report_written(dir: &Path, paths: &[PathBuf]) {
    println!("wrote {} files to {}", paths.len(), dir.display());
}

fn cmd_trajectory(a: &TrajectoryArgs, file: &ConfigFile) -> Result<(), CliError> {
    let r = ResolvedSim::resolve(&a.sim.overrides(), file)?;
    let rec = simulate(&r.cfg, &r.state).map_err(|e| CliError::Divergence(e.to_string()))?;
    let mut csv = Vec::new();
    rec.write_csv(&mut csv).map_err(io)?;
    let manifest = RunManifest::new("trajectory", r.cfg.seed, r.to_config(), state_value(&r));
    let paths = write_outputs(&a.out, manifest, &[Artifact::new("trajectory.csv", csv)])?;
    let lambdas = rec.lambda_series();
    println!(
        "{} samples, Λ(0) = {}, Λ(end) = {}",
        rec.len(),
        lambdas.first().copied().unwrap_or(f64::NAN),
        lambdas.last().copied().unwrap_or(f64::NAN)
    );
    report_written(&a.out, &paths);
    Ok(())
}

fn cmd_ensemble(a: &EnsembleArgs, file: &ConfigFile) -> Result<(), CliError> {
    let r = ResolvedSim::resolve(&a.sim.overrides(), file)?;
    let runs = a.runs.or(file.runs).unwrap_or(DEFAULT_RUNS);
    if runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let bin_width = a.bin_width.or(file.bin_width).unwrap_or(DEFAULT_BIN_WIDTH);
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(CliError::Usage(format!("--bin-width must be finite and > 0, got {bin_width}")));
    }
    let stats = run_ensemble(&r.cfg, &r.state, runs).map_err(|e| CliError::Divergence(e.to_string()))?;
    let summary = stats.summary();
    let mut avg = Vec::new();
    stats.write_avg_lambda_csv(&mut avg).map_err(io)?;
    let mut hist = Vec::new();
    genesis_histogram(&stats, bin_width).write_csv(&mut hist).map_err(io)?;
    let mut events = Vec::new();
    stats.write_events_csv(&mut events).map_err(io)?;
    let mut config = r.to_config();
    config.runs = Some(runs);
    config.bin_width = Some(bin_width);
    let manifest = RunManifest::new("ensemble", r.cfg.seed, config, state_value(&r));
    let artifacts = [
        Artifact::json("stats.json", &summary),
        Artifact::new("avg_lambda.csv", avg),
        Artifact::new("genesis_hist.csv", hist),
        Artifact::new("events.csv", events),
    ];
    let paths = write_outputs(&a.out, manifest, &artifacts)?;
    println!(
        "{} runs: {} with genesis, {} without; median genesis {} T_q",
        runs, summary.genesis_count, summary.never_count, summary.genesis_median
    );
    report_written(&a.out, &paths);
    Ok(())
}

const CLASS_CONDITIONS: &str = "the analytic crossing laws need rho11 = rho22 with rho33 != rho44 (odd route), \
     rho33 = rho44 with rho11 != rho22 (even route), or both equalities (blocked)";

fn cmd_predict(a: &PredictArgs) -> Result<(), CliError> {
    if let Some(n) = a.grid {
        if n < 2 {
            return Err(CliError::Usage("--grid needs N >= 2".into()));
        }
        let mut csv = Vec::new();
        write_grid_csv(&prediction_grid(n), &mut csv).map_err(io)?;
        if let Some(dir) = &a.out {
            let mut config = ConfigFile::default();
            config.n_max = Some(n);
            let manifest = RunManifest::new("predict", 0, config, serde_json::json!({ "grid": n }));
            write_outputs(dir, manifest, &[Artifact::new("grid.csv", csv.clone())])?;
        }
        print!("{}", String::from_utf8_lossy(&csv));
        return Ok(());
    }
    let spec = a.state.as_deref().expect("clap enforces --state or --grid");
    let p = config::parse_populations(spec)?;
    let state = DiagonalState::new(p).map_err(|e| CliError::Usage(format!("--state {spec}: {e}")))?;
    let pred = predict(&state).map_err(|e| match e {
        FptError::Unsupported { .. } => CliError::Usage(format!("--state {spec}: unsupported state; {CLASS_CONDITIONS}")),
        other => CliError::Usage(format!("--state {spec}: {other}")),
    })?;
    let json = serde_json::to_string_pretty(&pred).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(dir) = &a.out {
        let mut config = ConfigFile::default();
        config.state = Some(spec.to_string());
        let manifest = RunManifest::new("predict", 0, config, serde_json::json!({ "populations": p }));
        write_outputs(dir, manifest, &[Artifact::json("prediction.json", &pred)])?;
    }
    println!("{json}");
    Ok(())
}

fn cmd_projective(a: &ProjectiveArgs, file: &ConfigFile) -> Result<(), CliError> {
    let angle_flag = a.delta_angle.or(if a.k.is_none() { file.delta_angle } else { None });
    let k = if angle_flag.is_some() { None } else { Some(a.k.or(file.k).unwrap_or(30.0)) };
    let delta = match (k, angle_flag) {
        (Some(k), _) => {
            if !(k.is_finite() && k >= 1.0) {
                return Err(CliError::Usage(format!("--k must be finite and >= 1 so that δ = π/K <= π, got {k}")));
            }
            PI / k
        }
        (None, Some(d)) => d,
        (None, None) => unreachable!(),
    };
    if !(delta.is_finite() && (0.0..=PI).contains(&delta)) {
        return Err(CliError::Usage(format!("--delta-angle must be in [0, π], got {delta}")));
    }
    let n_max = a.n_max.or(file.n_max).unwrap_or(DEFAULT_N_MAX);
    if n_max == 0 {
        return Err(CliError::Usage("--n-max must be at least 1".into()));
    }
    let runs = a.runs.or(file.runs);
    if runs == Some(0) {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let seed = resolve_seed(a.seed, file.seed)?;

    let mut curve = String::new();
    match k {
        Some(k) => {
            curve.push_str("n,t,avg_concurrence\n");
            for n in 1..=n_max {
                let _ = writeln!(curve, "{n},{},{}", fmt_f64(n as f64 / k), fmt_f64(average_concurrence(n, delta)));
            }
        }
        None => {
            curve.push_str("n,avg_concurrence\n");
            for n in 1..=n_max {
                let _ = writeln!(curve, "{n},{}", fmt_f64(average_concurrence(n, delta)));
            }
        }
    }
    let mut artifacts = vec![Artifact::new("projective_analytic.csv", curve.into_bytes())];
    if let Some(runs) = runs {
        let mc = monte_carlo(delta, n_max, runs, seed);
        let mut csv = String::from("n,analytic,mean,se\n");
        let mut worst: f64 = 0.0;
        for n in 1..=n_max {
            let (m, se, an) = (mc.mean[n - 1], mc.std_error[n - 1], average_concurrence(n, delta));
            if se > 0.0 {
                worst = worst.max((m - an).abs() / se);
            }
            let _ = writeln!(csv, "{n},{},{},{}", fmt_f64(an), fmt_f64(m), fmt_f64(se));
        }
        println!("{runs} Monte Carlo runs: largest |mean − closed form| = {worst:.2} standard errors");
        artifacts.push(Artifact::new("projective_mc.csv", csv.into_bytes()));
    }
    let config = ConfigFile {
        k,
        delta_angle: Some(delta),
        n_max: Some(n_max),
        runs,
        seed: Some(seed),
        ..ConfigFile::default()
    };
    let manifest = RunManifest::new("projective", seed, config, serde_json::json!("mixed"));
    let paths = write_outputs(&a.out, manifest, &artifacts)?;
    println!("δ = {delta}, <C>(1) = {}", average_concurrence(1, delta));
    report_written(&a.out, &paths);
    Ok(())
}

fn cmd_validate(a: &ValidateArgs, file: &ConfigFile) -> Result<(), CliError> {
    let suite = match (a.suite, file.suite.as_deref()) {
        (Some(SuiteArg::Fast), _) | (None, None) | (None, Some("fast")) => Suite::Fast,
        (Some(SuiteArg::Full), _) | (None, Some("full")) => Suite::Full,
        (None, Some(other)) => return Err(CliError::Usage(format!("suite must be fast or full, got `{other}`"))),
    };
    let seed = resolve_seed(a.seed, file.seed)?;
    let outcome = run_suite(suite, seed)?;
    let config = ConfigFile {
        seed: Some(seed),
        suite: Some(suite.as_str().to_string()),
        ..ConfigFile::default()
    };
    let mut artifacts = vec![Artifact::json("checks.json", &outcome.checks)];
    artifacts.extend(outcome.artifacts.iter().cloned());
    let manifest = RunManifest::new("validate", seed, config, serde_json::json!("suite"));
    write_outputs(&a.out, manifest, &artifacts)?;
    print!("{}", render_table(&outcome.checks));
    let failed: Vec<String> = outcome
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} {}", c.id, c.name))
        .collect();
    if failed.is_empty() {
        println!("all {} checks passed ({} suite)", outcome.checks.len(), suite.as_str());
        Ok(())
    } else {
        Err(CliError::ValidationFailed(failed.join(", ")))
    }
}
