//! Closed-form crossing laws against quadrature and hand evaluation.

use entgen_core::fpt::{
    border_geometry, crossing_probability, crossing_thresholds, fpt_cdf_conditioned,
    fpt_mode_conditioned, fpt_pdf, fpt_pdf_conditioned, green_function, mean_crossing_time,
    p_genesis, p_sudden_death, predict, CrossingKind, DiagonalState, StateClass, DIFFUSION,
};
use entgen_core::quad::{integrate, integrate_to_infinity};
use entgen_core::Parity;

const RADII: [f64; 4] = [0.02, 0.35, 1.0, 5.0];

fn state(p: [f64; 4]) -> DiagonalState {
    DiagonalState::new(p).unwrap()
}

#[test]
fn worked_pair_same_probability_different_times() {
    let a = predict(&state([0.25, 0.25, 0.49, 0.01])).unwrap();
    let b = predict(&state([0.02, 0.02, 0.49, 0.47])).unwrap();
    assert!((a.p_cross - 0.98).abs() < 1e-12);
    assert!((b.p_cross - 0.98).abs() < 1e-12);
    assert!((a.mean_time - 0.5 * (50.0f64 / 48.0).ln()).abs() < 1e-12);
    assert!((b.mean_time - 0.5 * 2.0f64.ln()).abs() < 1e-12);
    assert_eq!(a.kind, CrossingKind::Genesis);
    assert!((a.mean_time - 0.02041).abs() < 5e-6);
    assert!((b.mean_time - 0.34657).abs() < 5e-6);
}

#[test]
fn limiting_cases() {
    let e = 0.01;
    let i = state([0.25 + e, 0.25 + e, 0.25 - 3.0 * e, 0.25 + e]);
    assert!((p_genesis(&i).unwrap() - (0.5 + 2.0 * e)).abs() < 1e-12);

    let ii = state([e, e, 0.0, 1.0 - 2.0 * e]);
    assert!((p_sudden_death(&ii).unwrap() - 4.0 * e).abs() < 1e-12);

    let iiia = state([0.25, 0.25, e, 0.5 - e]);
    assert!((p_genesis(&iiia).unwrap() - (1.0 - 2.0 * e)).abs() < 1e-12);
    let t = 0.5 * (0.5 / (0.5 - 2.0 * e)).ln().abs();
    assert!((mean_crossing_time(&iiia).unwrap() - t).abs() < 1e-12);

    let iiib = state([0.25 - e, 0.25 - e, e, 0.5 + e]);
    let direct = (0.5 - 2.0 * e) * (1.0 + (0.5 + 2.0 * e) / 0.5);
    assert!((p_sudden_death(&iiib).unwrap() - direct).abs() < 1e-12);
    assert!((direct - 0.9792).abs() < 1e-12);
}

#[test]
fn unconditioned_density_integrates_to_crossing_probability() {
    for r in RADII {
        for r2 in [-r, r] {
            for parity in [Parity::Even, Parity::Odd] {
                let total = integrate_to_infinity(|t| fpt_pdf(r2, t, parity), 0.0, 1e-12);
                let p = crossing_probability(r2, parity);
                let toward = (r2 > 0.0) == (parity == Parity::Even);
                let expected = if toward { 1.0 } else { (-2.0 * r).exp() };
                assert!((p - expected).abs() < 1e-14);
                assert!((total - p).abs() < 1e-8, "r2 {r2} {parity:?}: {total} vs {p}");
            }
        }
    }
}

#[test]
fn conditioned_density_moments() {
    for r in RADII {
        let norm = integrate_to_infinity(|t| fpt_pdf_conditioned(-r, t), 0.0, 1e-12);
        let mean = integrate_to_infinity(|t| t * fpt_pdf_conditioned(-r, t), 0.0, 1e-12);
        assert!((norm - 1.0).abs() < 1e-8, "r {r}: norm {norm}");
        assert!((mean - r).abs() < 1e-7 * r.max(1.0), "r {r}: mean {mean}");
        // Either parity's density, once normalised, is the conditioned law.
        for t in [0.1 * r, r, 3.0 * r] {
            let odd = fpt_pdf(-r, t, Parity::Odd) / crossing_probability(-r, Parity::Odd);
            let even = fpt_pdf(-r, t, Parity::Even) / crossing_probability(-r, Parity::Even);
            let c = fpt_pdf_conditioned(-r, t);
            assert!((odd - c).abs() <= 1e-12 * c.max(1.0));
            assert!((even - c).abs() <= 1e-10 * c.max(1.0));
        }
    }
}

#[test]
fn conditioned_cdf_matches_quadrature() {
    for r in RADII {
        for t in [0.25 * r, r, 2.0 * r, 6.0 * r] {
            let q = integrate(|s| fpt_pdf_conditioned(r, s), 0.0, t, 1e-13);
            let c = fpt_cdf_conditioned(r, t);
            assert!((q - c).abs() < 1e-9, "r {r}, t {t}: {q} vs {c}");
        }
    }
}

#[test]
fn mode_is_a_stationary_point() {
    for r in RADII {
        let m = fpt_mode_conditioned(r);
        let h = 1e-5 * m;
        let f = |t| fpt_pdf_conditioned(r, t);
        assert!(f(m) > f(m - h) && f(m) > f(m + h));
    }
}

#[test]
fn green_function_flux_is_first_passage_density() {
    // The absorbed flux −∂τ ∫G dγ and the boundary gradient D ∂γ G both equal
    // the first-passage density.
    let r2 = -0.7;
    for parity in [Parity::Even, Parity::Odd] {
        for tau in [0.05, 0.3, 1.0, 2.5] {
            let survival = |t: f64| integrate(|g| green_function(g, t, parity, r2), r2, 40.0, 1e-13);
            let h = 1e-4;
            let flux = -(survival(tau + h) - survival(tau - h)) / (2.0 * h);
            let f = fpt_pdf(r2, tau, parity);
            assert!((flux - f).abs() < 1e-6, "{parity:?} τ {tau}: {flux} vs {f}");
            let e = 1e-6;
            let grad = DIFFUSION * green_function(r2 + e, tau, parity, r2) / e;
            assert!((grad - f).abs() < 1e-4 * f.max(1.0), "{parity:?} τ {tau}: {grad} vs {f}");
            assert_eq!(green_function(r2, tau, parity, r2), 0.0);
        }
    }
}

#[test]
fn border_lines_hold_the_border() {
    let mut checked = 0;
    for gamma in [-1.3, -0.2, 0.4, 2.0] {
        let geo = border_geometry(gamma);
        for line in [geo.upper, geo.lower] {
            // A state on the line, updated by γ, sits on Λ = 0.
            for rho33 in [0.05, 0.2, 0.35] {
                let rho44 = line.a * rho33 + line.b;
                let pe = 1.0 - rho33 - rho44;
                if !(0.0..=1.0).contains(&rho44) || pe < 0.0 {
                    continue;
                }
                let s = state([pe / 2.0, pe / 2.0, rho33, rho44]);
                let (_, r2) = crossing_thresholds(&s);
                assert!((r2 - gamma).abs() < 1e-9, "γ {gamma}: r2 {r2}");
                assert!(line.contains(rho33, rho44, 1e-12));
                checked += 1;
            }
            assert!(line.residual(0.5, 0.5).abs() < 1e-12);
        }
    }
    assert!(checked >= 8, "only {checked} points on the lines");
}

#[test]
fn classes() {
    assert_eq!(state([0.25; 4]).class(), StateClass::Blocked);
    assert_eq!(state([0.3, 0.1, 0.3, 0.3]).class(), StateClass::EvenRoute);
    assert_eq!(state([0.1, 0.2, 0.3, 0.4]).class(), StateClass::Unsupported);
    let blocked = predict(&state([0.25; 4])).unwrap();
    assert_eq!(blocked.p_cross, 0.0);
    assert!(blocked.mean_time.is_infinite());
}
