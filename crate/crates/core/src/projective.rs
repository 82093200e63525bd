//! Strong-measurement model: short rotations alternating with projective
//! parity measurements.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::concurrence::branches_unchecked;
use crate::output::fmt_f64;
use crate::qstate::{DensityMatrix, Mat4, C64};
use crate::seeds::{run_rng, NOISE_STREAM};
use crate::stats::RunningStats;
use crate::Parity;

/// One realization of the projective model.
#[derive(Clone, Debug)]
pub struct ProjectiveRun {
    pub delta_angle: f64,
    pub outcomes: Vec<Parity>,
    pub states: Vec<DensityMatrix>,
    pub concurrences: Vec<f64>,
}

fn rotate(m: &mut Mat4, delta: f64) {
    if delta == 0.0 {
        return;
    }
    let (s, c) = delta.sin_cos();
    let cc = C64::new(c, 0.0);
    let mis = C64::new(0.0, -s);
    let pis = C64::new(0.0, s);
    for j in 0..4 {
        let (a, b) = (m[(1, j)], m[(2, j)]);
        m[(1, j)] = cc * a + mis * b;
        m[(2, j)] = mis * a + cc * b;
    }
    for i in 0..4 {
        let (a, b) = (m[(i, 1)], m[(i, 2)]);
        m[(i, 1)] = a * cc + b * pis;
        m[(i, 2)] = a * pis + b * cc;
    }
}

fn project(m: &Mat4, parity: Parity) -> Mat4 {
    let keep: [bool; 4] = match parity {
        Parity::Even => [true, true, false, false],
        Parity::Odd => [false, false, true, true],
    };
    let mut out = Mat4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            if keep[i] && keep[j] {
                out[(i, j)] = m[(i, j)];
            }
        }
    }
    let tr = out.trace().re;
    out / C64::new(tr, 0.0)
}

/// Rotate the (u2, u3) block by `δ`, then measure parity.
pub fn projective_step<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    delta_angle: f64,
    rng: &mut R,
) -> (Parity, DensityMatrix) {
    let mut m = *rho.bell();
    rotate(&mut m, delta_angle);
    let p_even = m[(0, 0)].re + m[(1, 1)].re;
    let u: f64 = rng.random();
    // `u < p` never selects a zero-probability branch since u ∈ [0, 1).
    let outcome = if u < p_even { Parity::Even } else { Parity::Odd };
    (outcome, DensityMatrix::from_bell_unchecked(project(&m, outcome)))
}

/// `n` measurement steps starting from `initial`; the first measurement
/// happens without a preceding rotation.
pub fn run<R: Rng + ?Sized>(
    initial: &DensityMatrix,
    delta_angle: f64,
    n: usize,
    rng: &mut R,
) -> ProjectiveRun {
    let mut out = ProjectiveRun {
        delta_angle,
        outcomes: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
        concurrences: Vec::with_capacity(n),
    };
    let mut rho = initial.clone();
    for k in 0..n {
        let angle = if k == 0 { 0.0 } else { delta_angle };
        let (o, next) = projective_step(&rho, angle, rng);
        out.concurrences.push(branches_unchecked(next.bell()).concurrence);
        out.outcomes.push(o);
        out.states.push(next.clone());
        rho = next;
    }
    out
}

impl ProjectiveRun {
    pub fn write_csv<W: Write>(&self, mut w: W, t_step: f64) -> io::Result<()> {
        writeln!(w, "step,time,outcome,concurrence")?;
        for (k, (o, c)) in self.outcomes.iter().zip(&self.concurrences).enumerate() {
            let n = k + 1;
            writeln!(w, "{},{},{},{}", n, fmt_f64(n as f64 * t_step), o.as_str(), fmt_f64(*c))?;
        }
        Ok(())
    }
}

/// `⟨C⟩(n) = 1 − cos^{2(n−1)} δ`.
pub fn average_concurrence(n: usize, delta_angle: f64) -> f64 {
    assert!(n >= 1, "n starts at 1");
    1.0 - delta_angle.cos().powi(2 * (n as i32 - 1))
}

/// Analytic curve on the time axis `t_n = n T_M = n/K` (units of `T_q`) with
/// `δ = π/K`.
pub fn zeno_comparison_curve(k_ratio: f64, n_max: usize) -> Vec<(f64, f64)> {
    let delta = std::f64::consts::PI / k_ratio;
    (1..=n_max)
        .map(|n| (n as f64 / k_ratio, average_concurrence(n, delta)))
        .collect()
}

/// Per-step Monte Carlo mean concurrence with standard errors.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectiveStats {
    pub delta_angle: f64,
    pub runs: usize,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

const BLOCK: usize = 64;

/// Average `runs` independent runs from the fully mixed state. Results are
/// independent of the rayon pool size.
pub fn monte_carlo(delta_angle: f64, n_max: usize, runs: usize, seed: u64) -> ProjectiveStats {
    let mixed = DensityMatrix::maximally_mixed();
    let blocks: Vec<Vec<RunningStats>> = (0..runs.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![RunningStats::default(); n_max];
            for r in (b * BLOCK)..((b + 1) * BLOCK).min(runs) {
                let mut rng = run_rng(seed, r as u64, NOISE_STREAM);
                let run = run(&mixed, delta_angle, n_max, &mut rng);
                for (a, &c) in acc.iter_mut().zip(&run.concurrences) {
                    a.push(c);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![RunningStats::default(); n_max];
    for block in &blocks {
        for (t, b) in total.iter_mut().zip(block) {
            t.merge(b);
        }
    }
    ProjectiveStats {
        delta_angle,
        runs,
        mean: total.iter().map(|s| s.mean).collect(),
        std_error: total.iter().map(|s| s.std_error()).collect(),
    }
}
