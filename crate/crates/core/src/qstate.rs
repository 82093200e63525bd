//! Two-qubit density matrices.
//!
//! States are stored in the Bell basis
//!
//! ```text
//! u1 = (|11> - |00>)/√2    u2 = (|11> + |00>)/√2
//! u3 = (|10> + |01>)/√2    u4 = (|10> - |01>)/√2
//! ```
//!
//! in which the Hamiltonian, the conditioned-state equation and the closed
//! form concurrence branches are all written. The computational basis is
//! ordered `|00>, |01>, |10>, |11>` (first qubit is the high bit) and is only
//! used for I/O and for the general Wootters construction.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;
pub type Mat4 = Matrix4<C64>;

/// Allowed deviation of the trace from one.
pub const TRACE_TOL: f64 = 1e-9;
/// Allowed negative excursion of eigenvalues.
pub const PSD_TOL: f64 = 1e-9;
/// Allowed `|m_ij - conj(m_ji)|` for matrices accepted by [`DensityMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Bell,
    Computational,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum StateError {
    #[error("matrix is not Hermitian: max |m_ij - conj(m_ji)| = {max_deviation:.3e}")]
    NotHermitian { max_deviation: f64 },
    #[error("trace is not one: Tr = {trace:.17}")]
    Trace { trace: f64 },
    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("unknown state preset `{0}`")]
    UnknownPreset(String),
    #[error("malformed state JSON: {0}")]
    Json(String),
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Unitary whose columns are the Bell vectors in computational coordinates,
/// so that `ρ_comp = U ρ_bell U†`.
pub fn bell_unitary() -> &'static Mat4 {
    static U: OnceLock<Mat4> = OnceLock::new();
    U.get_or_init(|| {
        let s = FRAC_1_SQRT_2;
        #[rustfmt::skip]
        let u = Mat4::new(
            c(-s), c(s), c(0.0), c(0.0),
            c(0.0), c(0.0), c(s), c(-s),
            c(0.0), c(0.0), c(s), c(s),
            c(s), c(s), c(0.0), c(0.0),
        );
        u
    })
}

pub fn to_computational(bell: &Mat4) -> Mat4 {
    let u = bell_unitary();
    u * bell * u.adjoint()
}

pub fn to_bell(computational: &Mat4) -> Mat4 {
    let u = bell_unitary();
    u.adjoint() * computational * u
}

fn max_hermitian_deviation(m: &Mat4) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in i..4 {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn hermitize(m: &Mat4) -> Mat4 {
    let mut h = *m;
    for i in 0..4 {
        h[(i, i)] = c(m[(i, i)].re);
        for j in (i + 1)..4 {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    h
}

/// Entries outside the Bell-basis X pattern (diagonal plus the (1,4) and
/// (2,3) anti-diagonal pairs).
pub(crate) const OFF_X_PATTERN: [(usize, usize); 8] = [
    (0, 1),
    (0, 2),
    (1, 0),
    (1, 3),
    (2, 0),
    (2, 3),
    (3, 1),
    (3, 2),
];

pub(crate) fn max_off_x(m: &Mat4) -> f64 {
    OFF_X_PATTERN
        .iter()
        .map(|&(i, j)| m[(i, j)].norm())
        .fold(0.0, f64::max)
}

fn eig2(a: f64, d: f64, z: C64) -> [f64; 2] {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = (half * half + z.norm_sqr()).sqrt();
    [mean - r, mean + r]
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Matrices with an exact X pattern split into two 2×2 blocks and are solved
/// in closed form; everything else goes through a full Hermitian eigensolver.
pub fn hermitian_eigenvalues(m: &Mat4) -> [f64; 4] {
    let mut ev = if max_off_x(m) == 0.0 {
        let outer = eig2(m[(0, 0)].re, m[(3, 3)].re, m[(0, 3)]);
        let inner = eig2(m[(1, 1)].re, m[(2, 2)].re, m[(1, 2)]);
        [outer[0], outer[1], inner[0], inner[1]]
    } else {
        let e = m.symmetric_eigen();
        [e.eigenvalues[0], e.eigenvalues[1], e.eigenvalues[2], e.eigenvalues[3]]
    };
    ev.sort_by(f64::total_cmp);
    ev
}

/// Reassemble `V diag(f(λ)) V†` for a Hermitian matrix.
pub(crate) fn hermitian_map(m: &Mat4, f: impl Fn(f64) -> f64) -> Mat4 {
    let e = m.symmetric_eigen();
    let mut out = Mat4::zeros();
    for k in 0..4 {
        let w = f(e.eigenvalues[k]);
        if w == 0.0 {
            continue;
        }
        let v = e.eigenvectors.column(k);
        out += (v * v.adjoint()) * c(w);
    }
    out
}

/// A validated two-qubit state in the Bell basis.
///
/// Construction enforces exact Hermiticity, unit trace within [`TRACE_TOL`]
/// and eigenvalues `>= -PSD_TOL`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: Mat4,
}

impl DensityMatrix {
    /// Validate a matrix given in `basis` and convert it to the Bell basis.
    pub fn new(entries: Mat4, basis: Basis) -> Result<Self, StateError> {
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(StateError::NonFinite);
        }
        let dev = max_hermitian_deviation(&entries);
        if dev > HERMITIAN_TOL {
            return Err(StateError::NotHermitian { max_deviation: dev });
        }
        let h = hermitize(&entries);
        let trace = h.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(StateError::Trace { trace });
        }
        let min = hermitian_eigenvalues(&h)[0];
        if min < -PSD_TOL {
            return Err(StateError::NotPositive { min_eigenvalue: min });
        }
        let bell = match basis {
            Basis::Bell => h,
            Basis::Computational => hermitize(&to_bell(&h)),
        };
        Ok(DensityMatrix { m: bell })
    }

    /// Wrap a Bell-basis matrix that is already known to be valid.
    pub(crate) fn from_bell_unchecked(m: Mat4) -> Self {
        DensityMatrix { m }
    }

    pub fn maximally_mixed() -> Self {
        Self::diagonal([0.25; 4]).expect("uniform diagonal is a state")
    }

    /// Bell-diagonal state `Σ p_i |u_i><u_i|`.
    pub fn diagonal(p: [f64; 4]) -> Result<Self, StateError> {
        let mut m = Mat4::zeros();
        for (i, &v) in p.iter().enumerate() {
            m[(i, i)] = c(v);
        }
        Self::new(m, Basis::Bell)
    }

    /// Projector onto the Bell vector `u_{k+1}` (`k` is zero based).
    pub fn bell_projector(k: usize) -> Self {
        assert!(k < 4, "Bell index out of range");
        let mut p = [0.0; 4];
        p[k] = 1.0;
        Self::diagonal(p).expect("projector is a state")
    }

    /// The boundary state at `Λ = 0` closest to the fully mixed state:
    /// `diag(1/4)` with `ρ23 = i/4`.
    pub fn sigma_boundary() -> Self {
        let mut m = Mat4::from_diagonal_element(c(0.25));
        m[(1, 2)] = C64::new(0.0, 0.25);
        m[(2, 1)] = C64::new(0.0, -0.25);
        Self::new(m, Basis::Bell).expect("boundary state is valid")
    }

    /// Named presets: `mixed`, `bell-u1` … `bell-u4`, `sigma-boundary`.
    pub fn preset(name: &str) -> Result<Self, StateError> {
        match name {
            "mixed" => Ok(Self::maximally_mixed()),
            "bell-u1" => Ok(Self::bell_projector(0)),
            "bell-u2" => Ok(Self::bell_projector(1)),
            "bell-u3" => Ok(Self::bell_projector(2)),
            "bell-u4" => Ok(Self::bell_projector(3)),
            "sigma-boundary" => Ok(Self::sigma_boundary()),
            other => Err(StateError::UnknownPreset(other.to_string())),
        }
    }

    pub const PRESETS: [&'static str; 6] = [
        "mixed",
        "bell-u1",
        "bell-u2",
        "bell-u3",
        "bell-u4",
        "sigma-boundary",
    ];

    /// Bell-basis matrix.
    pub fn bell(&self) -> &Mat4 {
        &self.m
    }

    pub fn computational(&self) -> Mat4 {
        to_computational(&self.m)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    /// Bell-basis populations `(ρ11, ρ22, ρ33, ρ44)`.
    pub fn populations(&self) -> [f64; 4] {
        [
            self.m[(0, 0)].re,
            self.m[(1, 1)].re,
            self.m[(2, 2)].re,
            self.m[(3, 3)].re,
        ]
    }

    /// Probability of an even parity outcome, `ρ11 + ρ22`.
    pub fn p_even(&self) -> f64 {
        self.m[(0, 0)].re + self.m[(1, 1)].re
    }

    /// Expected normalised current `Σ ρ_kk I_k`.
    pub fn mean_current(&self) -> f64 {
        let p = self.populations();
        p[0] + p[1] - p[2] - p[3]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.m)
    }

    pub fn purity(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest modulus among entries outside the Bell-basis X pattern.
    pub fn off_x_magnitude(&self) -> f64 {
        max_off_x(&self.m)
    }

    pub fn to_json(&self, basis: Basis) -> StateJson {
        let m = match basis {
            Basis::Bell => self.m,
            Basis::Computational => self.computational(),
        };
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                re[i][j] = m[(i, j)].re;
                im[i][j] = m[(i, j)].im;
            }
        }
        StateJson { basis, re, im }
    }

    pub fn from_json(json: &StateJson) -> Result<Self, StateError> {
        let mut m = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = C64::new(json.re[i][j], json.im[i][j]);
            }
        }
        Self::new(m, json.basis)
    }

    pub fn from_json_str(s: &str) -> Result<Self, StateError> {
        let json: StateJson = serde_json::from_str(s).map_err(|e| StateError::Json(e.to_string()))?;
        Self::from_json(&json)
    }
}

impl fmt::Display for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..4 {
            for j in 0..4 {
                let z = self.m[(i, j)];
                write!(f, "{:>9.5}{:+.5}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// On-disk state format: `{"basis": "bell", "re": [[..]], "im": [[..]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub basis: Basis,
    pub re: [[f64; 4]; 4],
    #[serde(default)]
    pub im: [[f64; 4]; 4],
}

/// `(1/2) Tr|ρ - σ|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let diff = rho.m - sigma.m;
    0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>()
}

/// `(1/2) Tr[(ρ - σ)²]`, half the squared Hilbert–Schmidt distance.
pub fn hs_half_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let diff = rho.m - sigma.m;
    0.5 * diff.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Result of [`sanitize`]: the repaired state and the largest entry-wise
/// change applied to the input.
#[derive(Clone, Debug)]
pub struct Sanitized {
    pub state: DensityMatrix,
    pub correction: f64,
}

/// Project an approximately valid matrix back onto the state space.
///
/// The matrix is re-Hermitized and renormalised; eigenvalues in
/// `[-PSD_TOL, 0)` are clipped to zero. Larger violations mean the
/// integrator has diverged and are reported as errors.
pub fn sanitize(m: &Mat4) -> Result<Sanitized, StateError> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(StateError::NonFinite);
    }
    let mut h = hermitize(m);
    let trace = h.trace().re;
    if (trace - 1.0).abs() > 100.0 * TRACE_TOL {
        return Err(StateError::Trace { trace });
    }
    if trace != 1.0 {
        h /= c(trace);
    }
    let min = hermitian_eigenvalues(&h)[0];
    if min < -PSD_TOL {
        return Err(StateError::NotPositive { min_eigenvalue: min });
    }
    if min < 0.0 {
        let mut clipped = hermitize(&hermitian_map(&h, |l| l.max(0.0)));
        let t = clipped.trace().re;
        clipped /= c(t);
        h = clipped;
    }
    let correction = (h - m).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(Sanitized {
        state: DensityMatrix { m: h },
        correction,
    })
}

/// 2×2 Hermitian block helper used by tests and diagnostics.
pub fn block_23(rho: &DensityMatrix) -> Matrix2<C64> {
    Matrix2::new(rho.m[(1, 1)], rho.m[(1, 2)], rho.m[(2, 1)], rho.m[(2, 2)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_abs(m: &Mat4) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn mixed_is_basis_independent() {
        let m = Mat4::from_diagonal_element(c(0.25));
        let a = DensityMatrix::new(m, Basis::Bell).unwrap();
        let b = DensityMatrix::new(m, Basis::Computational).unwrap();
        assert!(max_abs(&(a.bell() - b.bell())) < 1e-15);
        assert_eq!(a.populations(), [0.25; 4]);
        assert!(max_abs(&(a.computational() - m)) < 1e-15);
    }

    #[test]
    fn projector_u1() {
        let p = DensityMatrix::bell_projector(0);
        assert_eq!(p.populations(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn singlet_in_computational_basis() {
        let comp = DensityMatrix::bell_projector(3).computational();
        // |01> and |10> are indices 1 and 2.
        assert_abs_diff_eq!(comp[(1, 1)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(comp[(2, 2)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(comp[(1, 2)].re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(comp[(2, 1)].re, -0.5, epsilon = 1e-15);
        let rest: f64 = [(0, 0), (3, 3), (0, 3), (0, 1), (2, 3)]
            .iter()
            .map(|&(i, j)| comp[(i, j)].norm())
            .sum();
        assert!(rest < 1e-15);
    }

    #[test]
    fn sigma_boundary_in_computational_basis() {
        // Built by hand: σ = I/4 + (i/4)(|u2><u3| - |u3><u2|) with
        // u2 = (|00>+|11>)/√2 and u3 = (|01>+|10>)/√2, which puts ±i/8 on
        // every (even, odd) computational pair.
        let mut expected = Mat4::from_diagonal_element(c(0.25));
        for &e in &[0usize, 3] {
            for &o in &[1usize, 2] {
                expected[(e, o)] = C64::new(0.0, 0.125);
                expected[(o, e)] = C64::new(0.0, -0.125);
            }
        }
        let sigma = DensityMatrix::sigma_boundary();
        assert!(max_abs(&(sigma.computational() - expected)) < 1e-15);
        let back = DensityMatrix::new(expected, Basis::Computational).unwrap();
        assert!(max_abs(&(back.bell() - sigma.bell())) < 1e-15);
        assert_abs_diff_eq!(back.get(1, 2).re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(back.get(1, 2).im, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let mut m = Mat4::from_diagonal_element(c(0.25));
        m[(0, 1)] = c(0.1);
        assert!(matches!(
            DensityMatrix::new(m, Basis::Bell),
            Err(StateError::NotHermitian { .. })
        ));
        let m = Mat4::from_diagonal_element(c(0.3));
        assert!(matches!(
            DensityMatrix::new(m, Basis::Bell),
            Err(StateError::Trace { .. })
        ));
        let m = Mat4::from_diagonal(&nalgebra::Vector4::new(c(0.6), c(0.6), c(-0.1), c(-0.1)));
        assert!(matches!(
            DensityMatrix::new(m, Basis::Bell),
            Err(StateError::NotPositive { .. })
        ));
        assert!(matches!(
            DensityMatrix::preset("ghz"),
            Err(StateError::UnknownPreset(_))
        ));
    }

    #[test]
    fn distances_on_named_states() {
        let mixed = DensityMatrix::maximally_mixed();
        let sigma = DensityMatrix::sigma_boundary();
        let u1 = DensityMatrix::bell_projector(0);
        let u4 = DensityMatrix::bell_projector(3);
        assert_eq!(trace_distance(&mixed, &mixed), 0.0);
        assert_abs_diff_eq!(trace_distance(&u1, &u4), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&mixed, &sigma), 0.25, epsilon = 1e-15);
        assert_eq!(hs_half_distance(&sigma, &sigma), 0.0);
        assert_abs_diff_eq!(hs_half_distance(&mixed, &sigma), 1.0 / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hs_half_distance(&u1, &u4), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sanitize_fixed_point() {
        let sigma = DensityMatrix::sigma_boundary();
        let s = sanitize(sigma.bell()).unwrap();
        assert_eq!(s.state, sigma);
        assert_eq!(s.correction, 0.0);
    }

    #[test]
    fn sanitize_removes_small_antihermitian_part() {
        let base = DensityMatrix::sigma_boundary();
        let mut m = *base.bell();
        m[(0, 1)] += C64::new(1e-13, 0.0);
        m[(1, 0)] -= C64::new(1e-13, 0.0);
        let s = sanitize(&m).unwrap();
        assert!(max_abs(&(s.state.bell() - base.bell())) <= 1e-13);
        assert_eq!(max_hermitian_deviation(s.state.bell()), 0.0);
    }

    #[test]
    fn sanitize_clips_small_negative_eigenvalue() {
        let delta = 1e-12;
        let d = [0.5, 0.5, -1e-12, 1e-12 + delta];
        let m = Mat4::from_diagonal(&nalgebra::Vector4::new(c(d[0]), c(d[1]), c(d[2]), c(d[3])));
        let s = sanitize(&m).unwrap();
        // Clipping ρ33 leaves (0.5, 0.5, 0, 1e-12 + δ) up to normalisation.
        let kept = 1.0 + 1e-12 + delta;
        let pops = s.state.populations();
        let expected = [0.5 / kept, 0.5 / kept, 0.0, (1e-12 + delta) / kept];
        for k in 0..4 {
            assert_abs_diff_eq!(pops[k], expected[k], epsilon = 1e-15);
        }
        assert!(pops.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn sanitize_flags_divergence() {
        let m = Mat4::from_diagonal(&nalgebra::Vector4::new(c(0.6), c(0.5), c(-0.1), c(0.0)));
        assert!(matches!(sanitize(&m), Err(StateError::NotPositive { .. })));
        let m = Mat4::from_diagonal_element(c(0.26));
        assert!(matches!(sanitize(&m), Err(StateError::Trace { .. })));
    }

    #[test]
    fn json_round_trip() {
        let sigma = DensityMatrix::sigma_boundary();
        let s = serde_json::to_string(&sigma.to_json(Basis::Computational)).unwrap();
        let back = DensityMatrix::from_json_str(&s).unwrap();
        assert!(max_abs(&(back.bell() - sigma.bell())) < 1e-15);
        assert!(s.contains("\"basis\":\"computational\""));
    }
}
