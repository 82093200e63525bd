//! Stochastic simulation and analytics for entanglement genesis under a
//! continuous two-qubit parity measurement.
//!
//! The crate is organised bottom-up:
//!
//! * [`qstate`] — 4×4 density matrices held in the Bell basis, basis
//!   transforms, distances and the post-step [`qstate::sanitize`] projection.
//! * [`concurrence`] — Wootters concurrence and the closed forms for
//!   Bell-basis X-states.
//! * [`trajectory`] — the conditioned-state Itô equation and its integrators.
//! * [`projective`] — the strong-measurement (Zeno) model of alternating
//!   projections and short rotations.
//! * [`fpt`] — measurement-only Bayesian analytics: border thresholds,
//!   crossing probabilities and first-passage laws.
//! * [`ensemble`] — Monte Carlo harness, border events and the comparison of
//!   simulated ensembles against [`fpt`].
//!
//! Time is measured in units of the qubit period `T_q = 2π/Δ` with `ħ = 1`,
//! unless a function states otherwise (the first-passage analytics use
//! `τ = t/T_M`).

pub mod bridge;
pub mod concurrence;
pub mod ensemble;
pub mod fpt;
pub mod output;
pub mod projective;
pub mod qstate;
pub mod quad;
pub mod seeds;
pub mod stats;
pub mod trajectory;

use serde::{Deserialize, Serialize};

/// Outcome of a parity measurement: even = {u1, u2}, odd = {u3, u4}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Normalised detector current for this parity (`I_E = +1`, `I_O = -1`).
    pub fn current(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// Normalised currents of the four Bell states.
pub const BELL_CURRENTS: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
