//! Brownian-bridge refinement of level crossings between grid points.
//!
//! Conditioned on its endpoints, a Brownian path with constant drift over a
//! step is a Brownian bridge whatever the drift, so crossings missed by the
//! grid can be sampled exactly.

use rand::Rng;
use rand_distr::StandardNormal;

/// Probabilities below this are treated as no crossing.
pub const NEGLIGIBLE: f64 = 1e-14;
/// Default bisection depth; the located time is accurate to `h / 2^depth`.
pub const DEFAULT_DEPTH: u32 = 16;

fn beyond(x: f64, level: f64, from_above: bool) -> bool {
    if from_above {
        x <= level
    } else {
        x >= level
    }
}

/// Probability that a bridge from `x0` to `x1` over time `h` with variance
/// rate `s2` touches `level`, both endpoints being on the same side.
pub fn crossing_probability(x0: f64, x1: f64, level: f64, h: f64, s2: f64) -> f64 {
    let d0 = x0 - level;
    let d1 = x1 - level;
    if d0 * d1 <= 0.0 {
        1.0
    } else {
        (-2.0 * d0 * d1 / (s2 * h)).exp()
    }
}

/// Sample the first time in `(t0, t1]` at which a bridge from `x0` to `x1`
/// reaches `level`, or `None` if it does not. `x0` must not be beyond the
/// level.
#[allow(clippy::too_many_arguments)]
pub fn first_passage<R: Rng + ?Sized>(
    rng: &mut R,
    t0: f64,
    t1: f64,
    x0: f64,
    x1: f64,
    level: f64,
    s2: f64,
    depth: u32,
) -> Option<f64> {
    let from_above = x0 > level;
    let end_beyond = beyond(x1, level, from_above);
    if !end_beyond {
        let p = crossing_probability(x0, x1, level, t1 - t0, s2);
        if p < NEGLIGIBLE {
            return None;
        }
        if depth == 0 {
            let u: f64 = rng.random();
            return (u < p).then_some(0.5 * (t0 + t1));
        }
    } else if depth == 0 {
        return Some(t0 + (t1 - t0) * (x0 - level) / (x0 - x1));
    }
    let tm = 0.5 * (t0 + t1);
    let z: f64 = rng.sample(StandardNormal);
    let xm = 0.5 * (x0 + x1) + z * (s2 * (t1 - t0) / 4.0).sqrt();
    if beyond(xm, level, from_above) {
        return first_passage(rng, t0, tm, x0, xm, level, s2, depth - 1);
    }
    first_passage(rng, t0, tm, x0, xm, level, s2, depth - 1)
        .or_else(|| first_passage(rng, tm, t1, xm, x1, level, s2, depth - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::SimRng;
    use rand::SeedableRng;

    #[test]
    fn crossing_probability_limits() {
        assert_eq!(crossing_probability(1.0, -1.0, 0.0, 1.0, 1.0), 1.0);
        assert_eq!(crossing_probability(1.0, 1.0, 0.0, 1.0, 1.0), (-2.0f64).exp());
    }

    #[test]
    fn bridge_crossing_frequency_matches_formula() {
        // Fraction of sampled bridges that touch the level.
        let mut rng = SimRng::seed_from_u64(5);
        let n = 20_000;
        let p = crossing_probability(0.5, 0.3, 0.0, 1.0, 1.0);
        let hits = (0..n)
            .filter(|_| first_passage(&mut rng, 0.0, 1.0, 0.5, 0.3, 0.0, 1.0, 12).is_some())
            .count();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn crossing_time_lies_in_interval() {
        let mut rng = SimRng::seed_from_u64(6);
        for _ in 0..1000 {
            let t = first_passage(&mut rng, 2.0, 2.5, 0.2, -0.1, 0.0, 1.0, DEFAULT_DEPTH).unwrap();
            assert!(t > 2.0 && t <= 2.5);
        }
    }
}
