//! Monte Carlo ensembles of trajectories.
//!
//! Runs are grouped into fixed blocks of [`BLOCK_SIZE`] consecutive run
//! indices. Each block is reduced sequentially and blocks are merged in
//! index order, so every statistic is bit-identical for any thread count.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge;
use crate::concurrence::lambda;
use crate::fpt::{self, CrossingPrediction, DiagonalState, FptError};
use crate::output::{ext_real, fmt_f64};
use crate::qstate::DensityMatrix;
use crate::quad;
use crate::seeds::{run_rng, BRIDGE_STREAM, NOISE_STREAM};
use crate::stats::{binomial_z, chi_square, ChiSquareResult, RunningStats};
use crate::trajectory::{simulate_with_rng, SimConfig, TrajectoryError, TrajectoryRecord};
use crate::Parity;

pub const BLOCK_SIZE: usize = 64;
/// Threshold for the "first time `Λ` exceeds" probe.
pub const DEFAULT_PROBE: f64 = -0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Genesis,
    SuddenDeath,
    SuddenBirth,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Genesis => "genesis",
            EventKind::SuddenDeath => "sudden-death",
            EventKind::SuddenBirth => "sudden-birth",
        }
    }
}

/// A border crossing of `Λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorderEvent {
    /// Interpolated zero of `Λ`.
    pub time: f64,
    pub kind: EventKind,
    /// Index of the first sample on the far side of the border.
    pub sample: usize,
}

/// Streaming border-event detector over samples of `Λ`.
///
/// A sample counts as entangled when `Λ > 0`. The first upward crossing of
/// a run that starts unentangled is a genesis; later ones are births.
#[derive(Clone, Debug, Default)]
pub struct EventDetector {
    prev: Option<(f64, f64)>,
    started_entangled: bool,
    upward_seen: bool,
    index: usize,
    pub events: Vec<BorderEvent>,
}

impl EventDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feed the next sample; returns the event it completes, if any.
    pub fn push(&mut self, t: f64, lambda: f64) -> Option<BorderEvent> {
        let index = self.index;
        self.index += 1;
        let Some((t0, l0)) = self.prev.replace((t, lambda)) else {
            self.started_entangled = lambda > 0.0;
            return None;
        };
        let (was, now) = (l0 > 0.0, lambda > 0.0);
        if was == now {
            return None;
        }
        let time = t0 + (t - t0) * l0 / (l0 - lambda);
        let kind = if now {
            let first = !self.upward_seen && !self.started_entangled;
            self.upward_seen = true;
            if first {
                EventKind::Genesis
            } else {
                EventKind::SuddenBirth
            }
        } else {
            EventKind::SuddenDeath
        };
        let ev = BorderEvent {
            time,
            kind,
            sample: index,
        };
        self.events.push(ev);
        Some(ev)
    }
}

pub fn detect_events_in(times: &[f64], lambdas: &[f64]) -> Vec<BorderEvent> {
    let mut d = EventDetector::new();
    for (&t, &l) in times.iter().zip(lambdas) {
        d.push(t, l);
    }
    d.events
}

pub fn detect_events(record: &TrajectoryRecord) -> Vec<BorderEvent> {
    detect_events_in(&record.times, &record.lambda_series())
}

/// Worst-case state diagnostics over every recorded sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_trace_error: f64,
    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub max_hermitian_error: f64,
    pub min_eigenvalue: f64,
    pub max_abs_rho14: f64,
    pub max_abs_re_rho23: f64,
    /// Largest per-run sum of sanitize corrections.
    pub max_run_correction: f64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            max_trace_error: 0.0,
            max_hermitian_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_abs_rho14: 0.0,
            max_abs_re_rho23: 0.0,
            max_run_correction: 0.0,
        }
    }
}

impl Diagnostics {
    pub fn observe(&mut self, rho: &DensityMatrix) {
        self.max_trace_error = self.max_trace_error.max((rho.trace() - 1.0).abs());
        let m = rho.bell();
        for i in 0..4 {
            for j in i..4 {
                self.max_hermitian_error = self.max_hermitian_error.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        self.min_eigenvalue = self.min_eigenvalue.min(rho.eigenvalues()[0]);
        self.max_abs_rho14 = self.max_abs_rho14.max(rho.get(0, 3).norm());
        self.max_abs_re_rho23 = self.max_abs_re_rho23.max(rho.get(1, 2).re.abs());
    }

    pub fn merge(&mut self, o: &Diagnostics) {
        self.max_trace_error = self.max_trace_error.max(o.max_trace_error);
        self.max_hermitian_error = self.max_hermitian_error.max(o.max_hermitian_error);
        self.min_eigenvalue = self.min_eigenvalue.min(o.min_eigenvalue);
        self.max_abs_rho14 = self.max_abs_rho14.max(o.max_abs_rho14);
        self.max_abs_re_rho23 = self.max_abs_re_rho23.max(o.max_abs_re_rho23);
        self.max_run_correction = self.max_run_correction.max(o.max_run_correction);
    }
}

/// Per-run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub events: Vec<BorderEvent>,
    /// First time `Λ` exceeds the probe threshold.
    pub probe_time: Option<f64>,
    pub final_lambda: f64,
    pub final_concurrence: f64,
}

impl RunSummary {
    pub fn genesis(&self) -> Option<&BorderEvent> {
        self.events.iter().find(|e| e.kind == EventKind::Genesis)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_runs: usize,
    pub probe_threshold: f64,
    pub times: Vec<f64>,
    pub mean_lambda: Vec<f64>,
    pub se_lambda: Vec<f64>,
    pub mean_concurrence: Vec<f64>,
    pub se_concurrence: Vec<f64>,
    pub runs: Vec<RunSummary>,
    pub diagnostics: Diagnostics,
}

impl EnsembleStats {
    /// Interpolated genesis time per run.
    pub fn genesis_times(&self) -> Vec<Option<f64>> {
        self.runs.iter().map(|r| r.genesis().map(|e| e.time)).collect()
    }

    pub fn never_count(&self) -> usize {
        self.runs.iter().filter(|r| r.genesis().is_none()).count()
    }

    pub fn crossing_fraction(&self) -> f64 {
        (self.n_runs - self.never_count()) as f64 / self.n_runs as f64
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.runs
            .iter()
            .map(|r| r.events.iter().filter(|e| e.kind == kind).count())
            .sum()
    }

    pub fn probe_times(&self) -> Vec<Option<f64>> {
        self.runs.iter().map(|r| r.probe_time).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("run {run}: {source}")]
pub struct EnsembleError {
    pub run: usize,
    pub source: TrajectoryError,
}

struct Block {
    lambda: Vec<RunningStats>,
    concurrence: Vec<RunningStats>,
    times: Vec<f64>,
    runs: Vec<RunSummary>,
    diagnostics: Diagnostics,
}

fn run_block(
    cfg: &SimConfig,
    initial: &DensityMatrix,
    runs: std::ops::Range<usize>,
    probe: f64,
) -> Result<Block, EnsembleError> {
    let mut block = Block {
        lambda: Vec::new(),
        concurrence: Vec::new(),
        times: Vec::new(),
        runs: Vec::with_capacity(runs.len()),
        diagnostics: Diagnostics::default(),
    };
    for run in runs {
        let mut rng = run_rng(cfg.seed, run as u64, NOISE_STREAM);
        let mut detector = EventDetector::new();
        let mut probe_time = None;
        let mut last = (f64::NAN, f64::NAN);
        let mut k = 0;
        let correction = simulate_with_rng(cfg, initial, &mut rng, |s| {
            if block.lambda.len() <= k {
                block.lambda.push(RunningStats::default());
                block.concurrence.push(RunningStats::default());
                block.times.push(s.time);
            }
            let l = s.branches.selected;
            block.lambda[k].push(l);
            block.concurrence[k].push(s.branches.concurrence);
            block.diagnostics.observe(s.state);
            detector.push(s.time, l);
            if probe_time.is_none() && l > probe {
                probe_time = Some(s.time);
            }
            last = (l, s.branches.concurrence);
            k += 1;
            true
        })
        .map_err(|source| EnsembleError { run, source })?;
        block.diagnostics.max_run_correction = block.diagnostics.max_run_correction.max(correction);
        block.runs.push(RunSummary {
            events: detector.events,
            probe_time,
            final_lambda: last.0,
            final_concurrence: last.1,
        });
    }
    Ok(block)
}

/// Run `n_runs` trajectories with seeds derived from `cfg.seed`.
pub fn run_ensemble(
    cfg: &SimConfig,
    initial: &DensityMatrix,
    n_runs: usize,
) -> Result<EnsembleStats, EnsembleError> {
    run_ensemble_with_probe(cfg, initial, n_runs, DEFAULT_PROBE)
}

pub fn run_ensemble_with_probe(
    cfg: &SimConfig,
    initial: &DensityMatrix,
    n_runs: usize,
    probe: f64,
) -> Result<EnsembleStats, EnsembleError> {
    assert!(n_runs >= 1, "an ensemble needs at least one run");
    cfg.validate().map_err(|e| EnsembleError {
        run: 0,
        source: e.into(),
    })?;
    let blocks: Vec<Result<Block, EnsembleError>> = (0..n_runs.div_ceil(BLOCK_SIZE))
        .into_par_iter()
        .map(|b| run_block(cfg, initial, b * BLOCK_SIZE..((b + 1) * BLOCK_SIZE).min(n_runs), probe))
        .collect();
    let mut lambda: Vec<RunningStats> = Vec::new();
    let mut conc: Vec<RunningStats> = Vec::new();
    let mut times = Vec::new();
    let mut runs = Vec::with_capacity(n_runs);
    let mut diagnostics = Diagnostics::default();
    for block in blocks {
        let block = block?;
        if block.times.len() > times.len() {
            times = block.times;
        }
        if lambda.len() < block.lambda.len() {
            lambda.resize(block.lambda.len(), RunningStats::default());
            conc.resize(block.lambda.len(), RunningStats::default());
        }
        for (a, b) in lambda.iter_mut().zip(&block.lambda) {
            a.merge(b);
        }
        for (a, b) in conc.iter_mut().zip(&block.concurrence) {
            a.merge(b);
        }
        runs.extend(block.runs);
        diagnostics.merge(&block.diagnostics);
    }
    Ok(EnsembleStats {
        n_runs,
        probe_threshold: probe,
        times,
        mean_lambda: lambda.iter().map(|s| s.mean).collect(),
        se_lambda: lambda.iter().map(|s| s.std_error()).collect(),
        mean_concurrence: conc.iter().map(|s| s.mean).collect(),
        se_concurrence: conc.iter().map(|s| s.std_error()).collect(),
        runs,
        diagnostics,
    })
}

/// Genesis-time histogram with bins `[k w, (k+1) w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Runs without a genesis event in the window.
    pub never: u64,
}

pub fn genesis_histogram(stats: &EnsembleStats, bin_width: f64) -> Histogram {
    histogram(&stats.genesis_times(), bin_width)
}

pub fn histogram(times: &[Option<f64>], bin_width: f64) -> Histogram {
    assert!(bin_width > 0.0, "bin width must be positive");
    let mut counts = Vec::new();
    let mut never = 0;
    for t in times {
        match t {
            Some(t) => {
                let k = (t / bin_width).floor().max(0.0) as usize;
                if counts.len() <= k {
                    counts.resize(k + 1, 0);
                }
                counts[k] += 1;
            }
            None => never += 1,
        }
    }
    Histogram {
        bin_width,
        counts,
        never,
    }
}

impl Histogram {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_start,bin_end,count")?;
        for (k, c) in self.counts.iter().enumerate() {
            let a = k as f64 * self.bin_width;
            writeln!(w, "{},{},{}", fmt_f64(a), fmt_f64(a + self.bin_width), c)?;
        }
        Ok(())
    }
}

impl EnsembleStats {
    pub fn write_avg_lambda_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,mean_lambda,se_lambda,mean_concurrence,se_concurrence")?;
        for k in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(self.times[k]),
                fmt_f64(self.mean_lambda[k]),
                fmt_f64(self.se_lambda[k]),
                fmt_f64(self.mean_concurrence[k]),
                fmt_f64(self.se_concurrence[k])
            )?;
        }
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "run,time,kind,sample")?;
        for (run, r) in self.runs.iter().enumerate() {
            for e in &r.events {
                writeln!(w, "{},{},{},{}", run, fmt_f64(e.time), e.kind.as_str(), e.sample)?;
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> EnsembleSummary {
        let mut g: Vec<f64> = self.genesis_times().into_iter().flatten().collect();
        g.sort_by(f64::total_cmp);
        let mut probe: Vec<f64> = self.probe_times().into_iter().flatten().collect();
        probe.sort_by(f64::total_cmp);
        let median = |v: &[f64]| if v.is_empty() { f64::NAN } else { v[v.len() / 2] };
        let mut finals = RunningStats::default();
        self.runs.iter().for_each(|r| finals.push(r.final_concurrence));
        EnsembleSummary {
            n_runs: self.n_runs,
            genesis_count: g.len(),
            never_count: self.never_count(),
            crossing_fraction: self.crossing_fraction(),
            genesis_min: g.first().copied().unwrap_or(f64::NAN),
            genesis_median: median(&g),
            genesis_max: g.last().copied().unwrap_or(f64::NAN),
            sudden_deaths: self.count(EventKind::SuddenDeath),
            sudden_births: self.count(EventKind::SuddenBirth),
            probe_threshold: self.probe_threshold,
            probe_reached: probe.len(),
            probe_median: median(&probe),
            final_concurrence_mean: finals.mean,
            final_concurrence_se: finals.std_error(),
            diagnostics: self.diagnostics,
        }
    }
}

/// Scalar summary written to `stats.json`. Non-finite values are strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_runs: usize,
    pub genesis_count: usize,
    pub never_count: usize,
    pub crossing_fraction: f64,
    #[serde(with = "ext_real")]
    pub genesis_min: f64,
    #[serde(with = "ext_real")]
    pub genesis_median: f64,
    #[serde(with = "ext_real")]
    pub genesis_max: f64,
    pub sudden_deaths: usize,
    pub sudden_births: usize,
    pub probe_threshold: f64,
    pub probe_reached: usize,
    #[serde(with = "ext_real")]
    pub probe_median: f64,
    pub final_concurrence_mean: f64,
    pub final_concurrence_se: f64,
    pub diagnostics: Diagnostics,
}

/// Roots of `Λ(γ)` for the record-only update of `rho`, found by scanning
/// `γ ∈ [−50, 50]` and bisecting each sign change.
pub fn find_borders(rho: &DensityMatrix) -> Vec<f64> {
    use crate::trajectory::measurement_update;
    let f = |g: f64| lambda(&measurement_update(rho, g));
    let (lo, hi, n) = (-50.0, 50.0, 4000);
    let h = (hi - lo) / n as f64;
    let mut roots = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    for k in 1..=n {
        let b = lo + k as f64 * h;
        let fb = f(b);
        if (fa > 0.0) != (fb > 0.0) {
            let (mut x0, mut x1, mut f0) = (a, b, fa);
            for _ in 0..200 {
                let m = 0.5 * (x0 + x1);
                if m == x0 || m == x1 {
                    break;
                }
                let fm = f(m);
                if (fm > 0.0) == (f0 > 0.0) {
                    x0 = m;
                    f0 = fm;
                } else {
                    x1 = m;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
        a = b;
        fa = fb;
    }
    roots
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ValidationError {
    #[error("validation needs a measurement-only configuration (delta = 0)")]
    NeedsMeasurementOnly,
    #[error(transparent)]
    Fpt(#[from] FptError),
    #[error("expected at most one border, found {0:?}")]
    Borders(Vec<f64>),
    #[error(transparent)]
    Run(#[from] EnsembleError),
}

/// Comparison of a measurement-only ensemble with the analytic crossing
/// laws. Times in units of `T_M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub prediction: CrossingPrediction,
    /// Border found numerically from the simulated update.
    #[serde(with = "ext_real")]
    pub border_numeric: f64,
    pub border_mismatch: f64,
    pub n_runs: usize,
    pub crossings: usize,
    pub never: usize,
    /// Observation window in `T_M`.
    pub window: f64,
    pub fraction: f64,
    /// Crossing probability within the window.
    pub p_window: f64,
    pub z_fraction: f64,
    #[serde(with = "ext_real")]
    pub mean_time: f64,
    #[serde(with = "ext_real")]
    pub mean_expected: f64,
    pub mean_se: f64,
    pub z_mean: f64,
    pub chi_square: Option<ChiSquareResult>,
    /// Conditioned crossing times in `T_M`, in run order.
    pub crossing_times: Vec<f64>,
    pub passed: bool,
}

/// Number of equal-probability bins for the crossing-time chi-square.
pub const CHI_BINS: usize = 20;

/// Inverse of the truncated conditioned CDF on `[0, window]`.
fn conditioned_quantile(r: f64, q: f64, window: f64) -> f64 {
    let total = fpt::fpt_cdf_conditioned(r, window);
    let target = q * total;
    let (mut a, mut b) = (0.0, window);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if fpt::fpt_cdf_conditioned(r, m) < target {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Simulate `n_runs` measurement-only trajectories from `initial` and compare
/// against [`fpt::predict`].
///
/// A run stops at its first border crossing. Crossings are detected from the
/// sign of `Λ` of the simulated state at every step and, between steps, by
/// Brownian-bridge sampling of `γ` against the numerically located border.
pub fn validate_against_analytics(
    initial: &DiagonalState,
    cfg: &SimConfig,
    n_runs: usize,
) -> Result<ValidationReport, ValidationError> {
    if cfg.delta != 0.0 {
        return Err(ValidationError::NeedsMeasurementOnly);
    }
    let prediction = fpt::predict(initial)?;
    let rho0 = initial.to_density();
    let borders = find_borders(&rho0);
    if borders.len() > 1 {
        return Err(ValidationError::Borders(borders));
    }
    let border = borders.first().copied();
    let mut cfg = cfg.clone();
    cfg.stride = 1;
    cfg.validate().map_err(|e| EnsembleError {
        run: 0,
        source: e.into(),
    })?;
    let t_m = cfg.t_m();
    let s0 = cfg.s0();
    let window = cfg.n_steps() as f64 * cfg.dt / t_m;
    let start_entangled = lambda(&rho0) > 0.0;

    let crossing_time = |run: usize| -> Result<Option<f64>, EnsembleError> {
        let mut rng = run_rng(cfg.seed, run as u64, NOISE_STREAM);
        let mut bridge_rng = run_rng(cfg.seed, run as u64, BRIDGE_STREAM);
        let mut prev = (0.0, 0.0);
        let mut hit = None;
        simulate_with_rng(&cfg, &rho0, &mut rng, |s| {
            let tau = s.time / t_m;
            let gamma = 2.0 * s.record / s0;
            if s.step == 0 {
                prev = (tau, gamma);
                return true;
            }
            let crossed_here = (s.branches.selected > 0.0) != start_entangled;
            if let Some(r) = border {
                let found = bridge::first_passage(
                    &mut bridge_rng,
                    prev.0,
                    tau,
                    prev.1,
                    gamma,
                    r,
                    1.0,
                    bridge::DEFAULT_DEPTH,
                );
                // The state's Λ is authoritative at grid points; the bridge
                // only adds crossings missed in between.
                hit = match (found, crossed_here) {
                    (Some(t), _) => Some(t),
                    (None, true) => Some(tau),
                    (None, false) => None,
                };
            } else if crossed_here {
                hit = Some(tau);
            }
            prev = (tau, gamma);
            hit.is_none()
        })
        .map_err(|source| EnsembleError { run, source })?;
        Ok(hit)
    };

    let blocks: Vec<Result<Vec<Option<f64>>, EnsembleError>> = (0..n_runs.div_ceil(BLOCK_SIZE))
        .into_par_iter()
        .map(|b| {
            (b * BLOCK_SIZE..((b + 1) * BLOCK_SIZE).min(n_runs))
                .map(crossing_time)
                .collect()
        })
        .collect();
    let mut times = Vec::with_capacity(n_runs);
    for b in blocks {
        times.extend(b?);
    }
    let crossing_times: Vec<f64> = times.iter().flatten().copied().collect();
    let crossings = crossing_times.len();

    let border_numeric = border.unwrap_or(f64::INFINITY);
    let border_mismatch = match border {
        Some(r) => (r - prediction.boundary).abs(),
        None if !prediction.boundary.is_finite() => 0.0,
        None => f64::INFINITY,
    };

    // Analytic expectations restricted to the window.
    let (p_window, mean_expected) = if prediction.boundary == 0.0 {
        // Already on the border: every walker crosses immediately.
        (prediction.p_cross, 0.0)
    } else if prediction.boundary.is_finite() {
        let r = prediction.boundary;
        let p = initial.p();
        let (pe, po) = (p[0] + p[1], p[2] + p[3]);
        let pdf = |t: f64| pe * fpt::fpt_pdf(r, t, Parity::Even) + po * fpt::fpt_pdf(r, t, Parity::Odd);
        let mass = quad::integrate(pdf, 0.0, window, 1e-13);
        let first = quad::integrate(|t| t * pdf(t), 0.0, window, 1e-13);
        (mass, if mass > 0.0 { first / mass } else { f64::NAN })
    } else {
        (0.0, f64::INFINITY)
    };

    let fraction = crossings as f64 / n_runs as f64;
    let z_fraction = binomial_z(crossings as u64, n_runs as u64, p_window.clamp(0.0, 1.0));
    let mut rs = RunningStats::default();
    crossing_times.iter().for_each(|&t| rs.push(t));
    let (mean_time, mean_se, z_mean) = if crossings >= 2 {
        let se = rs.std_error();
        (rs.mean, se, (rs.mean - mean_expected) / se)
    } else {
        (f64::NAN, f64::NAN, 0.0)
    };

    let chi = if crossings >= 10 * CHI_BINS && prediction.boundary.is_finite() && prediction.boundary != 0.0 {
        let r = prediction.boundary;
        let edges: Vec<f64> = (0..=CHI_BINS)
            .map(|k| match k {
                0 => 0.0,
                k if k == CHI_BINS => window,
                k => conditioned_quantile(r, k as f64 / CHI_BINS as f64, window),
            })
            .collect();
        let mut observed = vec![0u64; CHI_BINS];
        for &t in &crossing_times {
            let k = edges[1..].partition_point(|&e| e < t).min(CHI_BINS - 1);
            observed[k] += 1;
        }
        let expected = vec![crossings as f64 / CHI_BINS as f64; CHI_BINS];
        Some(chi_square(&observed, &expected))
    } else {
        None
    };

    let passed = border_mismatch <= 1e-9
        && z_fraction.abs() <= 3.0
        && z_mean.abs() <= 3.0
        && chi.map_or(true, |c| c.p_value > 0.01);
    Ok(ValidationReport {
        prediction,
        border_numeric,
        border_mismatch,
        n_runs,
        crossings,
        never: n_runs - crossings,
        window,
        fraction,
        p_window,
        z_fraction,
        mean_time,
        mean_expected,
        mean_se,
        z_mean,
        chi_square: chi,
        crossing_times,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_entangled_record_has_no_events() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.01).collect();
        assert!(detect_events_in(&t, &vec![1.0; 100]).is_empty());
    }

    #[test]
    fn single_crossing_is_genesis() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let ev = detect_events_in(&t, &[-0.5, -0.1, 0.3, 0.4]);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, EventKind::Genesis);
        assert!((ev[0].time - 1.25).abs() < 1e-15);
        assert_eq!(ev[0].sample, 2);
    }

    #[test]
    fn sine_record_events_at_analytic_roots() {
        let dt = 1e-3;
        let t: Vec<f64> = (0..=3000).map(|k| k as f64 * dt).collect();
        let l: Vec<f64> = t.iter().map(|&t| (std::f64::consts::TAU * t).sin() - 0.5).collect();
        let ev = detect_events_in(&t, &l);
        // sin(2πt) = 1/2 at t = 1/12 + k and 5/12 + k.
        let roots: Vec<f64> = (0..3).flat_map(|k| [k as f64 + 1.0 / 12.0, k as f64 + 5.0 / 12.0]).collect();
        assert_eq!(ev.len(), roots.len());
        for (e, r) in ev.iter().zip(&roots) {
            assert!((e.time - r).abs() < dt);
        }
        let kinds: Vec<EventKind> = ev.iter().map(|e| e.kind).collect();
        assert_eq!(kinds[0], EventKind::Genesis);
        assert_eq!(kinds[1], EventKind::SuddenDeath);
        assert_eq!(kinds[2], EventKind::SuddenBirth);
    }

    #[test]
    fn histogram_single_bin() {
        let h = histogram(&[Some(1.0), Some(1.0), None], 0.2);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts[5], 2);
        assert_eq!(h.never, 1);
    }

    #[test]
    fn stationary_bell_ensemble() {
        let mut cfg = SimConfig::new(1.0);
        cfg.duration = 0.2;
        let s = run_ensemble(&cfg, &DensityMatrix::bell_projector(0), 5).unwrap();
        assert!(s.mean_lambda.iter().all(|&l| (l - 1.0).abs() < 1e-12));
        assert_eq!(s.count(EventKind::SuddenDeath), 0);
        assert_eq!(s.never_count(), 5);
    }

    #[test]
    fn borders_of_worked_state() {
        let s = DiagonalState::new([0.25, 0.25, 0.49, 0.01]).unwrap();
        let b = find_borders(&s.to_density());
        assert_eq!(b.len(), 1);
        assert!((b[0] - fpt::crossing_thresholds(&s).1).abs() < 1e-12);
        assert!(find_borders(&DensityMatrix::maximally_mixed()).is_empty());
    }
}
