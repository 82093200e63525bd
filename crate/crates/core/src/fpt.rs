//! Measurement-only analytics for Bell-diagonal states.
//!
//! Without tunnelling a Bell-diagonal state stays Bell-diagonal and depends
//! on the record only through the log-likelihood `γ`, which in `τ = t/T_M`
//! is a Brownian motion with drift `v = +1` (even) or `−1` (odd) and
//! diffusion constant `D = 1/2`. Entanglement borders are the roots `r1`,
//! `r2` of `Λ(γ) = 0`; crossing laws follow from first passage of `γ`
//! through the single finite root.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::concurrence::diagonal_lambda;
use crate::output::{ext_real, fmt_f64};
use crate::qstate::DensityMatrix;
use crate::{Parity, BELL_CURRENTS};

/// Tolerance for the equalities `ρ11 = ρ22`, `ρ33 = ρ44` defining the
/// supported classes.
pub const CLASS_TOL: f64 = 1e-12;
/// Diffusion constant of `γ` in `τ` units.
pub const DIFFUSION: f64 = 0.5;
/// Drift magnitude of `γ` in `τ` units.
pub const DRIFT: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FptError {
    #[error("invalid diagonal state: {0}")]
    InvalidState(String),
    #[error(
        "unsupported state: needs rho11 = rho22 != 0 with rho33 != rho44, or rho33 = rho44 != 0 \
         with rho11 != rho22 (got {p:?})"
    )]
    Unsupported { p: [f64; 4] },
    #[error("state is entangled (Lambda = {lambda}); use the sudden-death probability")]
    Entangled { lambda: f64 },
    #[error("state is not entangled (Lambda = {lambda}); use the genesis probability")]
    NotEntangled { lambda: f64 },
    #[error("both crossing routes are blocked (rho11 = rho22 and rho33 = rho44)")]
    Blocked,
}

/// Bell-diagonal populations `(ρ11, ρ22, ρ33, ρ44)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalState {
    p: [f64; 4],
}

impl DiagonalState {
    pub fn new(p: [f64; 4]) -> Result<Self, FptError> {
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(FptError::InvalidState(format!("negative or non-finite entry in {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(FptError::InvalidState(format!("entries sum to {sum}")));
        }
        Ok(DiagonalState { p })
    }

    /// Diagonal of a Bell-diagonal density matrix.
    pub fn from_density(rho: &DensityMatrix) -> Result<Self, FptError> {
        let m = rho.bell();
        let off = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm())
            .fold(0.0, f64::max);
        if off > 1e-12 {
            return Err(FptError::InvalidState(format!("off-diagonal entry of size {off:.3e}")));
        }
        Self::new(rho.populations())
    }

    pub fn p(&self) -> [f64; 4] {
        self.p
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::diagonal(self.p).expect("validated populations")
    }

    pub fn p_even(&self) -> f64 {
        self.p[0] + self.p[1]
    }

    pub fn p_odd(&self) -> f64 {
        self.p[2] + self.p[3]
    }

    /// `ρ11 = ρ22`: the even route to entanglement is closed.
    pub fn even_blocked(&self) -> bool {
        (self.p[0] - self.p[1]).abs() <= CLASS_TOL
    }

    /// `ρ33 = ρ44`: the odd route to entanglement is closed.
    pub fn odd_blocked(&self) -> bool {
        (self.p[2] - self.p[3]).abs() <= CLASS_TOL
    }

    pub fn lambda(&self) -> f64 {
        diagonal_lambda(&self.p)
    }

    /// Exchange the even and odd pairs; maps `γ` to `−γ`.
    pub fn mirrored(&self) -> Self {
        DiagonalState {
            p: [self.p[2], self.p[3], self.p[0], self.p[1]],
        }
    }

    pub fn class(&self) -> StateClass {
        match (self.even_blocked(), self.odd_blocked()) {
            (true, true) => StateClass::Blocked,
            (true, false) if self.p_even() > 0.0 => StateClass::OddRoute,
            (false, true) if self.p_odd() > 0.0 => StateClass::EvenRoute,
            _ => StateClass::Unsupported,
        }
    }
}

/// Which single finite border a state has.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateClass {
    /// `ρ11 = ρ22 ≠ 0`, `ρ33 ≠ ρ44`: finite border `r2`.
    OddRoute,
    /// `ρ33 = ρ44 ≠ 0`, `ρ11 ≠ ρ22`: finite border `r1`.
    EvenRoute,
    /// Both routes closed; `Λ` never changes sign.
    Blocked,
    /// Two finite borders, or no measurement dynamics at all.
    Unsupported,
}

/// Posterior populations after a record with log-likelihood `γ`:
/// even entries scaled by `e^γ`, odd by `e^{−γ}`, renormalised.
///
/// Evaluated in the log domain, so any finite `γ` is safe and extreme values
/// return the limiting subspace state.
pub fn bayes_update(state: &DiagonalState, gamma: f64) -> DiagonalState {
    if gamma == 0.0 {
        return *state;
    }
    let logs: [f64; 4] = std::array::from_fn(|k| state.p[k].ln() + BELL_CURRENTS[k] * gamma);
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: [f64; 4] = std::array::from_fn(|k| (logs[k] - max).exp());
    let n: f64 = w.iter().sum();
    DiagonalState {
        p: std::array::from_fn(|k| w[k] / n),
    }
}

/// `Λ` of the posterior state.
pub fn lambda_of_gamma(state: &DiagonalState, gamma: f64) -> f64 {
    diagonal_lambda(&bayes_update(state, gamma).p)
}

/// The border thresholds
/// `r1 = ½ ln[(ρ33+ρ44)/|ρ11−ρ22|]`, `r2 = −½ ln[(ρ11+ρ22)/|ρ33−ρ44|]`.
///
/// A blocked route gives `r1 = +∞` or `r2 = −∞`.
pub fn crossing_thresholds(state: &DiagonalState) -> (f64, f64) {
    let p = state.p;
    let r1 = if state.even_blocked() {
        f64::INFINITY
    } else {
        0.5 * (state.p_odd() / (p[0] - p[1]).abs()).ln()
    };
    let r2 = if state.odd_blocked() {
        f64::NEG_INFINITY
    } else {
        -0.5 * (state.p_even() / (p[2] - p[3]).abs()).ln()
    };
    (r1, r2)
}

/// The state seen through the odd-route formulas, with the mirror applied
/// for the even-route class.
fn odd_route_view(state: &DiagonalState) -> Result<(DiagonalState, bool), FptError> {
    match state.class() {
        StateClass::OddRoute => Ok((*state, false)),
        StateClass::EvenRoute => Ok((state.mirrored(), true)),
        StateClass::Blocked => Err(FptError::Blocked),
        StateClass::Unsupported => Err(FptError::Unsupported { p: state.p }),
    }
}

/// `P_EG = 2 max[ρ33, ρ44]` for an unentangled state with an open odd route
/// (mirrored for the even route).
pub fn p_genesis(state: &DiagonalState) -> Result<f64, FptError> {
    let (s, _) = odd_route_view(state)?;
    let lambda = state.lambda();
    if lambda > 0.0 {
        return Err(FptError::Entangled { lambda });
    }
    Ok(2.0 * s.p[2].max(s.p[3]))
}

/// `P_SD = P_EG (1 − ρ33 − ρ44)/|ρ33 − ρ44|` for an entangled state.
pub fn p_sudden_death(state: &DiagonalState) -> Result<f64, FptError> {
    let (s, _) = odd_route_view(state)?;
    let lambda = state.lambda();
    if lambda <= 0.0 {
        return Err(FptError::NotEntangled { lambda });
    }
    let p_eg = 2.0 * s.p[2].max(s.p[3]);
    Ok(p_eg * (1.0 - s.p[2] - s.p[3]) / (s.p[2] - s.p[3]).abs())
}

/// Mean crossing time conditioned on crossing, in units of `T_M`: `|r2|`
/// (`|r1|` for the even route), infinite for blocked states.
pub fn mean_crossing_time(state: &DiagonalState) -> Result<f64, FptError> {
    match odd_route_view(state) {
        Ok((s, _)) => Ok(crossing_thresholds(&s).1.abs()),
        Err(FptError::Blocked) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn drift_of(parity: Parity) -> f64 {
    parity.current() * DRIFT
}

/// Probability that a walker with drift `v` and diffusion `d` started at 0
/// ever reaches `r`: `exp((r v − |r v|)/(2d))`.
pub fn crossing_probability_general(r: f64, v: f64, d: f64) -> f64 {
    ((r * v - (r * v).abs()) / (2.0 * d)).exp()
}

pub fn crossing_probability(r: f64, parity: Parity) -> f64 {
    crossing_probability_general(r, drift_of(parity), DIFFUSION)
}

/// First-passage density at `r` for drift `v` and diffusion `d`:
/// `|r|/√(4dπτ³) exp(−(r − vτ)²/(4dτ))`.
pub fn fpt_pdf_general(r: f64, tau: f64, v: f64, d: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let x = r - v * tau;
    r.abs() / (4.0 * d * std::f64::consts::PI * tau.powi(3)).sqrt() * (-x * x / (4.0 * d * tau)).exp()
}

/// Unconditioned first-passage density through `r2` for one parity's drift.
pub fn fpt_pdf(r2: f64, tau: f64, parity: Parity) -> f64 {
    fpt_pdf_general(r2, tau, drift_of(parity), DIFFUSION)
}

/// Density conditioned on crossing: inverse Gaussian with mean `|r2|` and
/// shape `r2²`.
pub fn fpt_pdf_conditioned(r2: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let mu = r2.abs();
    let x = mu - tau;
    mu / (2.0 * std::f64::consts::PI * tau.powi(3)).sqrt() * (-x * x / (2.0 * tau)).exp()
}

/// CDF of [`fpt_pdf_conditioned`]. Accurate for `|r2| ≲ 300`.
pub fn fpt_cdf_conditioned(r2: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let mu = r2.abs();
    let std = Normal::standard();
    let s = (mu * mu / tau).sqrt();
    let a = std.cdf(s * (tau / mu - 1.0));
    let b = std.cdf(-s * (tau / mu + 1.0));
    (a + (2.0 * mu).exp() * b).min(1.0)
}

/// Mode of [`fpt_pdf_conditioned`]: `(√(4r2² + 9) − 3)/2`.
pub fn fpt_mode_conditioned(r2: f64) -> f64 {
    0.5 * ((4.0 * r2 * r2 + 9.0).sqrt() - 3.0)
}

/// Density of surviving walkers started at `γ = 0` with an absorbing border
/// at `r2`: free drifted Gaussian minus its image,
/// `φ(γ − vτ)·[1 − exp(−r2 (r2 − γ)/(Dτ))]`.
pub fn green_function(gamma: f64, tau: f64, parity: Parity, r2: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let d = DIFFUSION;
    let x = gamma - drift_of(parity) * tau;
    let free = (-x * x / (4.0 * d * tau)).exp() / (4.0 * std::f64::consts::PI * d * tau).sqrt();
    let image = if r2.is_finite() {
        (-r2 * (r2 - gamma) / (d * tau)).exp()
    } else {
        0.0
    };
    (free * (1.0 - image)).max(0.0)
}

/// A border line `ρ44 = a ρ33 + b` in the `(ρ33, ρ44)` plane at fixed
/// `ρ11 = ρ22`, together with its implicit form (the lower line is vertical
/// at `γ = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BorderLine {
    pub a: f64,
    pub b: f64,
    e2g: f64,
    upper: bool,
}

impl BorderLine {
    /// Signed residual of the implicit form
    /// `e^{2γ}(1 − ρ33 − ρ44) = ±(ρ44 − ρ33)`.
    pub fn residual(&self, rho33: f64, rho44: f64) -> f64 {
        let diff = if self.upper { rho44 - rho33 } else { rho33 - rho44 };
        self.e2g * (1.0 - rho33 - rho44) - diff
    }

    pub fn contains(&self, rho33: f64, rho44: f64, tol: f64) -> bool {
        self.residual(rho33, rho44).abs() <= tol
    }
}

/// Initial states that sit on the border after a record `γ`:
/// `upper` for `ρ44 > ρ33`, `lower` for `ρ44 < ρ33`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BorderGeometry {
    pub upper: BorderLine,
    pub lower: BorderLine,
}

pub fn border_geometry(gamma: f64) -> BorderGeometry {
    let e = (2.0 * gamma).exp();
    BorderGeometry {
        upper: BorderLine {
            a: (1.0 - e) / (1.0 + e),
            b: e / (1.0 + e),
            e2g: e,
            upper: true,
        },
        lower: BorderLine {
            a: (1.0 + e) / (1.0 - e),
            b: -e / (1.0 - e),
            e2g: e,
            upper: false,
        },
    }
}

/// What a crossing means for this state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingKind {
    Genesis,
    SuddenDeath,
    None,
}

/// First-passage parameters in `τ` units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdfParams {
    #[serde(with = "ext_real")]
    pub boundary_distance: f64,
    pub drift: f64,
    pub diffusion: f64,
}

/// Analytic crossing bundle for a supported diagonal state. Times in `T_M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingPrediction {
    pub state: [f64; 4],
    pub class: StateClass,
    #[serde(with = "ext_real")]
    pub r1: f64,
    #[serde(with = "ext_real")]
    pub r2: f64,
    /// The finite threshold that is actually crossed (`r2`, or `r1` for the
    /// even route).
    #[serde(with = "ext_real")]
    pub boundary: f64,
    pub initially_entangled: bool,
    pub kind: CrossingKind,
    pub p_cross: f64,
    /// Crossing probability given the hidden parity `(even, odd)`.
    pub p_cross_given: [f64; 2],
    /// Mean crossing time given a crossing.
    #[serde(with = "ext_real", rename = "t_c")]
    pub mean_time: f64,
    pub time_unit: String,
    pub pdf_params: PdfParams,
}

impl CrossingPrediction {
    /// `p_E P^E + p_O P^O` from the per-parity crossing probabilities.
    pub fn weighted_p_cross(&self) -> f64 {
        (self.state[0] + self.state[1]) * self.p_cross_given[0]
            + (self.state[2] + self.state[3]) * self.p_cross_given[1]
    }
}

pub fn predict(state: &DiagonalState) -> Result<CrossingPrediction, FptError> {
    let (r1, r2) = crossing_thresholds(state);
    let lambda = state.lambda();
    let entangled = lambda > 0.0;
    let class = state.class();
    let (boundary, p_cross, kind) = match class {
        StateClass::Unsupported => return Err(FptError::Unsupported { p: state.p }),
        StateClass::Blocked => (f64::NAN, 0.0, CrossingKind::None),
        StateClass::OddRoute | StateClass::EvenRoute => {
            let boundary = if class == StateClass::OddRoute { r2 } else { r1 };
            if entangled {
                (boundary, p_sudden_death(state)?, CrossingKind::SuddenDeath)
            } else {
                (boundary, p_genesis(state)?, CrossingKind::Genesis)
            }
        }
    };
    let p_cross_given = if boundary.is_finite() {
        [
            crossing_probability(boundary, Parity::Even),
            crossing_probability(boundary, Parity::Odd),
        ]
    } else {
        [0.0, 0.0]
    };
    let distance = if boundary.is_finite() { boundary.abs() } else { f64::INFINITY };
    Ok(CrossingPrediction {
        state: state.p,
        class,
        r1,
        r2,
        boundary: if boundary.is_nan() { f64::INFINITY } else { boundary },
        initially_entangled: entangled,
        kind,
        p_cross,
        p_cross_given,
        mean_time: distance,
        time_unit: "T_M".to_string(),
        pdf_params: PdfParams {
            boundary_distance: distance,
            drift: DRIFT,
            diffusion: DIFFUSION,
        },
    })
}

/// One grid point of the `(ρ33, ρ44)` plane at `ρ11 = ρ22`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub rho33: f64,
    pub rho44: f64,
    /// `None` outside the admissible triangle or for unsupported states.
    pub p_cross: Option<f64>,
    pub t_c: Option<f64>,
}

/// `n × n` grid over `[0, 1]²` (`n ≥ 2`).
pub fn prediction_grid(n: usize) -> Vec<GridPoint> {
    assert!(n >= 2, "grid needs at least two points per axis");
    let h = 1.0 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (rho33, rho44) = (i as f64 * h, j as f64 * h);
            let rest = 1.0 - rho33 - rho44;
            let pred = if rest < -1e-12 {
                None
            } else {
                let half = rest.max(0.0) / 2.0;
                DiagonalState::new([half, half, rho33, rho44])
                    .ok()
                    .and_then(|s| predict(&s).ok())
            };
            out.push(GridPoint {
                rho33,
                rho44,
                p_cross: pred.as_ref().map(|p| p.p_cross),
                t_c: pred.as_ref().map(|p| p.mean_time),
            });
        }
    }
    out
}

pub fn write_grid_csv<W: Write>(grid: &[GridPoint], mut w: W) -> io::Result<()> {
    writeln!(w, "rho33,rho44,p_cross,t_c_over_t_m")?;
    for g in grid {
        let f = |v: Option<f64>| fmt_f64(v.unwrap_or(f64::NAN));
        writeln!(w, "{},{},{},{}", fmt_f64(g.rho33), fmt_f64(g.rho44), f(g.p_cross), f(g.t_c))?;
    }
    Ok(())
}
