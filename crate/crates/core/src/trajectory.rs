//! Conditioned evolution of the two-qubit state under a continuous parity
//! measurement.
//!
//! In the Bell basis the conditioned state obeys the Itô equation
//!
//! ```text
//! dρ_ij = (I − ⟨I⟩)(I_i + I_j − 2⟨I⟩) ρ_ij dt / S0
//!         − ρ_ij [(I_i − I_j)²/(4 S0) + γ_ij] dt − i[H, ρ]_ij dt
//! ```
//!
//! with `I dt = ⟨I⟩ dt + dW` and `Var(dW) = C_NOISE · S0 · dt`. Two
//! integrators are provided:
//!
//! * [`Scheme::Kraus`] (default) draws the record increment from its exact
//!   predictive law, applies the Gaussian measurement operator, the
//!   environment dephasing and the exact rotation for `dt`. Each factor is a
//!   completely positive map, so the state stays positive at any `dt`, and it
//!   agrees with the Itô equation to first order in `dt`.
//! * [`Scheme::EulerMaruyama`] applies the equation literally.
//!
//! Noise calibration: with `C_NOISE = 1/2` the dephasing term is exactly the
//! one an ideal detector produces, and the log-likelihood
//! `γ(t) = (2/S0) ∫ I dt` has drift `±2/S0` and variance rate `2/S0`. Setting
//! `S0 = 2 T_M` turns this into drift `±1/T_M` and variance rate `1/T_M`, the
//! first-passage convention used in [`crate::fpt`].

use std::f64::consts::TAU;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concurrence::{branches_or_general, LambdaBranches};
use crate::output::fmt_f64;
use crate::qstate::{sanitize, DensityMatrix, Mat4, StateError, C64};
use crate::seeds::{run_rng, SimRng, NOISE_STREAM};
use crate::BELL_CURRENTS;

/// Ratio of the per-step noise variance to `S0/dt`.
pub const C_NOISE: f64 = 0.5;
/// `S0 / T_M` in the convention of this crate.
pub const S0_PER_TM: f64 = 2.0;
/// Default number of steps per `min(T_q, T_M)`.
pub const DEFAULT_STEPS_PER_TIME: f64 = 200.0;
/// Smallest number of steps per `min(T_q, T_M)` accepted by validation.
pub const MIN_STEPS_PER_TIME: f64 = 100.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Kraus,
    EulerMaruyama,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigError {
    #[error("{field} must be {requirement}, got {value}")]
    Invalid {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("dt = {dt} exceeds min(T_q, T_M)/100 = {limit}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("gamma must be symmetric, nonnegative, with zero diagonal")]
    Gamma,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("integrator diverged at step {step} (t = {time}): {source}")]
    Divergence {
        step: usize,
        time: f64,
        source: StateError,
    },
}

/// Physical and numerical parameters of a run.
///
/// Times are in units of `T_q = 2π/Δ`. With `delta = 0` (measurement only)
/// `T_q` is infinite and the time unit is `T_M · K`, i.e. `T_M = 1/K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub delta: f64,
    pub k_ratio: f64,
    pub dt: f64,
    pub duration: f64,
    pub gamma: [[f64; 4]; 4],
    pub seed: u64,
    pub scheme: Scheme,
    /// Record every `stride`-th step.
    pub stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::new(1.0)
    }
}

impl SimConfig {
    /// Defaults for a given `K`: `Δ = 2π`, default step, 10 `T_q`.
    pub fn new(k_ratio: f64) -> Self {
        let mut cfg = SimConfig {
            delta: TAU,
            k_ratio,
            dt: 0.0,
            duration: 10.0,
            gamma: [[0.0; 4]; 4],
            seed: 0,
            scheme: Scheme::Kraus,
            stride: 1,
        };
        cfg.dt = cfg.default_dt();
        cfg
    }

    /// Measurement-only configuration with `T_M = 1`, so times are in `T_M`.
    pub fn measurement_only() -> Self {
        let mut cfg = SimConfig::new(1.0);
        cfg.delta = 0.0;
        cfg.dt = cfg.default_dt();
        cfg
    }

    fn time_unit(&self) -> f64 {
        if self.delta > 0.0 {
            TAU / self.delta
        } else {
            1.0
        }
    }

    /// Qubit period `2π/Δ`; infinite without tunnelling.
    pub fn t_q(&self) -> f64 {
        if self.delta > 0.0 {
            TAU / self.delta
        } else {
            f64::INFINITY
        }
    }

    pub fn t_m(&self) -> f64 {
        self.time_unit() / self.k_ratio
    }

    pub fn s0(&self) -> f64 {
        S0_PER_TM * self.t_m()
    }

    /// Variance per unit time of the integrated record `∫ I dt`.
    pub fn noise_rate(&self) -> f64 {
        C_NOISE * self.s0()
    }

    pub fn default_dt(&self) -> f64 {
        self.t_q().min(self.t_m()) / DEFAULT_STEPS_PER_TIME
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field,
                    requirement: "finite and > 0",
                    value,
                })
            }
        };
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(ConfigError::Invalid {
                field: "delta",
                requirement: "finite and >= 0",
                value: self.delta,
            });
        }
        positive("k_ratio", self.k_ratio)?;
        positive("dt", self.dt)?;
        positive("duration", self.duration)?;
        if self.stride == 0 {
            return Err(ConfigError::Invalid {
                field: "stride",
                requirement: ">= 1",
                value: 0.0,
            });
        }
        let limit = self.t_q().min(self.t_m()) / MIN_STEPS_PER_TIME;
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(ConfigError::StepTooLarge { dt: self.dt, limit });
        }
        for i in 0..4 {
            if self.gamma[i][i] != 0.0 {
                return Err(ConfigError::Gamma);
            }
            for j in 0..4 {
                let g = self.gamma[i][j];
                if !(g.is_finite() && g >= 0.0) || g != self.gamma[j][i] {
                    return Err(ConfigError::Gamma);
                }
            }
        }
        Ok(())
    }
}

/// Bell-basis Hamiltonian: `Δ` at (2,3) and (3,2), zero elsewhere.
pub fn hamiltonian(delta: f64) -> [[f64; 4]; 4] {
    let mut h = [[0.0; 4]; 4];
    h[1][2] = delta;
    h[2][1] = delta;
    h
}

/// White-noise sample with variance `C_NOISE · s0 / dt`.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, dt: f64, s0: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * (C_NOISE * s0 / dt).sqrt()
}

fn mean_current(m: &Mat4) -> f64 {
    (0..4).map(|k| m[(k, k)].re * BELL_CURRENTS[k]).sum()
}

/// Rotate the (u2, u3) block by `exp(−iHt)` with `θ = Δt`.
fn rotate_23(m: &mut Mat4, theta: f64) {
    if theta == 0.0 {
        return;
    }
    let (s, c) = theta.sin_cos();
    let cc = C64::new(c, 0.0);
    let mis = C64::new(0.0, -s);
    // Rows: M ← U M.
    for j in 0..4 {
        let a = m[(1, j)];
        let b = m[(2, j)];
        m[(1, j)] = cc * a + mis * b;
        m[(2, j)] = mis * a + cc * b;
    }
    // Columns: M ← M U†.
    let pis = C64::new(0.0, s);
    for i in 0..4 {
        let a = m[(i, 1)];
        let b = m[(i, 2)];
        m[(i, 1)] = a * cc + b * pis;
        m[(i, 2)] = a * pis + b * cc;
    }
}

fn dephase_env(m: &mut Mat4, gamma: &[[f64; 4]; 4], dt: f64) {
    for i in 0..4 {
        for j in 0..4 {
            if gamma[i][j] > 0.0 {
                m[(i, j)] *= (-gamma[i][j] * dt).exp();
            }
        }
    }
}

/// Apply the measurement operator for a record increment `y = ∫ I dt`
/// over one step: `ρ_ij ← f_i f_j ρ_ij / N` with `f_i = exp(I_i y / (2σ²))`,
/// the exact Gaussian measurement operator up to a common factor.
fn apply_record(m: &mut Mat4, y: f64, noise_rate: f64) {
    let a = y / (2.0 * noise_rate);
    // Normalise by the larger factor to stay finite for extreme records.
    let (fe, fo) = if a >= 0.0 {
        (1.0, (-2.0 * a).exp())
    } else {
        ((2.0 * a).exp(), 1.0)
    };
    let f = [fe, fe, fo, fo];
    for i in 0..4 {
        for j in 0..4 {
            m[(i, j)] *= f[i] * f[j];
        }
    }
    let tr = m.trace().re;
    *m /= C64::new(tr, 0.0);
}

/// Quantum-Bayesian update of a state by an accumulated log-likelihood
/// `γ = (2/S0) ∫ I dt`: `ρ_ij ← e^{(I_i + I_j)γ/2} ρ_ij / N`.
///
/// This is the record-dependent part of a measurement-only evolution; for
/// Bell-diagonal states it is the full update.
pub fn measurement_update(rho: &DensityMatrix, gamma: f64) -> DensityMatrix {
    let mut m = *rho.bell();
    // apply_record uses y / (2σ²) = γ / 2 when y / σ² = γ.
    apply_record(&mut m, gamma, 1.0);
    DensityMatrix::from_bell_unchecked(m)
}

/// Information about one integration step.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    /// Record increment `∫ I dt` over the step.
    pub record: f64,
    /// Largest entry change made by [`sanitize`].
    pub correction: f64,
}

/// One Euler–Maruyama step of the Itô equation with noise sample `xi`
/// (`I = ⟨I⟩ + xi`).
pub fn ito_step(
    rho: &DensityMatrix,
    cfg: &SimConfig,
    xi: f64,
) -> Result<(DensityMatrix, StepOutcome), StateError> {
    let m = rho.bell();
    let s0 = cfg.s0();
    let dt = cfg.dt;
    let mean = mean_current(m);
    let mut next = *m;
    for i in 0..4 {
        for j in 0..4 {
            let r = m[(i, j)];
            let (ii, ij) = (BELL_CURRENTS[i], BELL_CURRENTS[j]);
            let stochastic = xi * (ii + ij - 2.0 * mean) / s0 * dt;
            let decay = ((ii - ij).powi(2) / (4.0 * s0) + cfg.gamma[i][j]) * dt;
            next[(i, j)] += r * (stochastic - decay);
        }
    }
    // −i[H, ρ] dt with H = Δ(|u2><u3| + |u3><u2|).
    if cfg.delta != 0.0 {
        let minus_i_dt = C64::new(0.0, -cfg.delta * dt);
        for j in 0..4 {
            for i in 0..4 {
                let hr = match i {
                    1 => m[(2, j)],
                    2 => m[(1, j)],
                    _ => C64::new(0.0, 0.0),
                };
                let rh = match j {
                    1 => m[(i, 2)],
                    2 => m[(i, 1)],
                    _ => C64::new(0.0, 0.0),
                };
                next[(i, j)] += minus_i_dt * (hr - rh);
            }
        }
    }
    let s = sanitize(&next)?;
    Ok((
        s.state,
        StepOutcome {
            record: (mean + xi) * dt,
            correction: s.correction,
        },
    ))
}

/// Deterministic part of [`kraus_step`] for a given record increment
/// `y = ∫ I dt`: measurement operator, environment dephasing, rotation.
pub fn kraus_update(
    rho: &DensityMatrix,
    cfg: &SimConfig,
    y: f64,
) -> Result<(DensityMatrix, StepOutcome), StateError> {
    let mut m = *rho.bell();
    // The mixed-parity dephasing of the Itô equation is produced by the
    // normalisation of this update; no separate decay factor is needed.
    apply_record(&mut m, y, cfg.noise_rate());
    dephase_env(&mut m, &cfg.gamma, cfg.dt);
    rotate_23(&mut m, cfg.delta * cfg.dt);
    let s = sanitize(&m)?;
    Ok((
        s.state,
        StepOutcome {
            record: y,
            correction: s.correction,
        },
    ))
}

/// Draw `y = ∫ I dt` over one step from its predictive law: a hidden parity
/// with probability `p_E`, then `N(±dt, σ² dt)`.
pub fn sample_record<R: Rng + ?Sized>(rho: &DensityMatrix, cfg: &SimConfig, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let drift = if u < rho.p_even() { 1.0 } else { -1.0 };
    let z: f64 = rng.sample(StandardNormal);
    drift * cfg.dt + z * (cfg.noise_rate() * cfg.dt).sqrt()
}

/// One completely positive step: sample the record from its predictive law,
/// apply the measurement operator, environment dephasing and the rotation.
pub fn kraus_step<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<(DensityMatrix, StepOutcome), StateError> {
    let y = sample_record(rho, cfg, rng);
    kraus_update(rho, cfg, y)
}

/// A recorded sample handed to [`simulate_with`] observers.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    /// Step index (`t = step · dt`).
    pub step: usize,
    pub time: f64,
    pub state: &'a DensityMatrix,
    /// Current over the last step, `y/dt`; the noise-free mean at `t = 0`.
    pub current: f64,
    /// Cumulative record `∫₀ᵗ I dt`.
    pub record: f64,
    pub branches: LambdaBranches,
}

/// Run one realization, calling `observe` at every recorded sample.
///
/// Returning `false` from `observe` stops the run early. The random stream is
/// derived from `cfg.seed` and `run_index`.
pub fn simulate_with(
    cfg: &SimConfig,
    initial: &DensityMatrix,
    run_index: u64,
    observe: impl FnMut(&Sample<'_>) -> bool,
) -> Result<f64, TrajectoryError> {
    cfg.validate()?;
    let mut rng = run_rng(cfg.seed, run_index, NOISE_STREAM);
    simulate_with_rng(cfg, initial, &mut rng, observe)
}

/// As [`simulate_with`] with an explicit generator. Returns the cumulative
/// sanitize correction.
pub fn simulate_with_rng(
    cfg: &SimConfig,
    initial: &DensityMatrix,
    rng: &mut SimRng,
    mut observe: impl FnMut(&Sample<'_>) -> bool,
) -> Result<f64, TrajectoryError> {
    let n = cfg.n_steps();
    let mut rho = initial.clone();
    let mut record = 0.0;
    let mut total_correction = 0.0;
    let first = Sample {
        step: 0,
        time: 0.0,
        state: &rho,
        current: rho.mean_current(),
        record,
        branches: branches_or_general(&rho),
    };
    if !observe(&first) {
        return Ok(0.0);
    }
    for step in 1..=n {
        let result = match cfg.scheme {
            Scheme::Kraus => kraus_step(&rho, cfg, rng),
            Scheme::EulerMaruyama => {
                let xi = sample_noise(rng, cfg.dt, cfg.s0());
                ito_step(&rho, cfg, xi)
            }
        };
        let (next, outcome) = result.map_err(|source| TrajectoryError::Divergence {
            step,
            time: step as f64 * cfg.dt,
            source,
        })?;
        rho = next;
        record += outcome.record;
        total_correction += outcome.correction;
        if step % cfg.stride == 0 {
            let sample = Sample {
                step,
                time: step as f64 * cfg.dt,
                state: &rho,
                current: outcome.record / cfg.dt,
                record,
                branches: branches_or_general(&rho),
            };
            if !observe(&sample) {
                break;
            }
        }
    }
    Ok(total_correction)
}

/// A stored realization.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub currents: Vec<f64>,
    /// `(1/t) ∫₀ᵗ I dt`; the noise-free mean current at `t = 0`.
    pub integrated_output: Vec<f64>,
    pub lambdas: Vec<LambdaBranches>,
    /// Sum over steps of the largest sanitize correction.
    pub total_correction: f64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn lambda_series(&self) -> Vec<f64> {
        self.lambdas.iter().map(|b| b.selected).collect()
    }

    pub fn concurrence_series(&self) -> Vec<f64> {
        self.lambdas.iter().map(|b| b.concurrence).collect()
    }

    pub const CSV_HEADER: &'static str = "t,rho_11,rho_22,rho_33,rho_44,re_rho_23,im_rho_23,re_rho_14,im_rho_14,current,integrated_output,lambda,concurrence";

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for k in 0..self.len() {
            let s = &self.states[k];
            let p = s.populations();
            let r23 = s.get(1, 2);
            let r14 = s.get(0, 3);
            let cols = [
                self.times[k],
                p[0],
                p[1],
                p[2],
                p[3],
                r23.re,
                r23.im,
                r14.re,
                r14.im,
                self.currents[k],
                self.integrated_output[k],
                self.lambdas[k].selected,
                self.lambdas[k].concurrence,
            ];
            let line: Vec<String> = cols.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Run one realization and store every recorded sample.
pub fn simulate(cfg: &SimConfig, initial: &DensityMatrix) -> Result<TrajectoryRecord, TrajectoryError> {
    let mut rec = TrajectoryRecord::default();
    let correction = simulate_with(cfg, initial, 0, |s| {
        rec.times.push(s.time);
        rec.states.push(s.state.clone());
        rec.currents.push(s.current);
        rec.integrated_output.push(if s.step == 0 {
            s.current
        } else {
            s.record / s.time
        });
        rec.lambdas.push(s.branches);
        true
    })?;
    rec.total_correction = correction;
    Ok(rec)
}
