//! Two-qubit concurrence.
//!
//! [`wootters_concurrence`] works for any state. For Bell-basis X-states with
//! `ρ14 = 0` and imaginary `ρ23` (the class closed under the measurement
//! dynamics) the largest square-root eigenvalue is one of three simple
//! branches, see [`lambda_branches`].

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::{hermitian_map, DensityMatrix, Mat4, C64};

/// Eigenvalues of the spin-flipped product below this are rounding noise.
pub const EIG_TOL: f64 = 1e-12;
/// Allowed deviation from the X pattern / closed class.
pub const X_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConcurrenceError {
    #[error("state is not a Bell-basis X-state: largest off-pattern entry {max_off_pattern:.3e}")]
    NotXState { max_off_pattern: f64 },
    #[error(
        "state is outside the closed X class (|ρ14| = {rho14:.3e}, |Re ρ23| = {re_rho23:.3e})"
    )]
    NotClosedClass { rho14: f64, re_rho23: f64 },
}

/// The three candidate `Λ` values, their maximum and the concurrence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaBranches {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub selected: f64,
    pub concurrence: f64,
}

impl LambdaBranches {
    fn from_branches(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        let selected = lambda1.max(lambda2).max(lambda3);
        LambdaBranches {
            lambda1,
            lambda2,
            lambda3,
            selected,
            concurrence: selected.max(0.0),
        }
    }

    /// Wrap a `Λ` obtained from the general construction; the individual
    /// branches are undefined outside the closed class and are set to NaN.
    pub fn general(lambda: f64) -> Self {
        LambdaBranches {
            lambda1: f64::NAN,
            lambda2: f64::NAN,
            lambda3: f64::NAN,
            selected: lambda,
            concurrence: lambda.clamp(0.0, 1.0),
        }
    }

    /// Index (1, 2 or 3) of the winning branch; ties go to the lowest index.
    pub fn winner(&self) -> u8 {
        if self.lambda1 == self.selected {
            1
        } else if self.lambda2 == self.selected {
            2
        } else {
            3
        }
    }
}

/// `√λ` values of the spin-flipped product for a Bell-basis X-state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqrtEigenvalues {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

fn sigma_yy() -> Mat4 {
    let z = C64::new(0.0, 0.0);
    let p = C64::new(1.0, 0.0);
    let m = C64::new(-1.0, 0.0);
    #[rustfmt::skip]
    let yy = Matrix4::new(
        z, z, z, m,
        z, z, p, z,
        z, p, z, z,
        m, z, z, z,
    );
    yy
}

/// Square roots of the eigenvalues of `ρ (σy⊗σy) ρ* (σy⊗σy)`, descending.
///
/// The product is similar to `A A†` with `A = √ρ (σy⊗σy) √ρ*`, so the
/// square roots are the singular values of `A`.
pub fn wootters_sqrt_eigenvalues(rho: &DensityMatrix) -> [f64; 4] {
    let comp = rho.computational();
    let root = hermitian_map(&comp, |l| if l < EIG_TOL { 0.0 } else { l.sqrt() });
    let a = root * sigma_yy() * root.map(|z| z.conj());
    let sv = a.singular_values();
    let mut out = [sv[0], sv[1], sv[2], sv[3]];
    out.sort_by(|x, y| y.total_cmp(x));
    out
}

/// Signed `Λ = √λ1 − √λ2 − √λ3 − √λ4` from the general construction.
pub fn wootters_lambda(rho: &DensityMatrix) -> f64 {
    let s = wootters_sqrt_eigenvalues(rho);
    s[0] - s[1] - s[2] - s[3]
}

pub fn wootters_concurrence(rho: &DensityMatrix) -> f64 {
    wootters_lambda(rho).max(0.0).min(1.0)
}

/// Closed-form `√λ` values for a Bell-basis X-state.
pub fn xstate_sqrt_eigenvalues(rho: &DensityMatrix) -> Result<SqrtEigenvalues, ConcurrenceError> {
    let off = rho.off_x_magnitude();
    if off > X_TOL {
        return Err(ConcurrenceError::NotXState {
            max_off_pattern: off,
        });
    }
    let p = rho.populations();
    let pair = |x: f64, y: f64, z: C64| -> (f64, f64) {
        let s = x + y;
        let first = ((s + 2.0 * z.re) * (s - 2.0 * z.re)).max(0.0).sqrt();
        let second = ((x - y) * (x - y) + 4.0 * z.im * z.im).sqrt();
        (
            (0.5 * (first - second)).max(0.0),
            0.5 * (first + second),
        )
    };
    let (a, b) = pair(p[0], p[3], rho.get(0, 3));
    let (c, d) = pair(p[1], p[2], rho.get(1, 2));
    Ok(SqrtEigenvalues { a, b, c, d })
}

/// `Λ1 = 2ρ11 − 1`, `Λ2 = 2ρ44 − 1`,
/// `Λ3 = √((ρ22 − ρ33)² + 4|ρ23|²) + ρ22 + ρ33 − 1`.
///
/// The `1` is expanded as the trace, so degenerate states such as
/// `diag(a, a, 0, 0)` give an exact zero rather than rounding noise.
pub fn lambda_branches(rho: &DensityMatrix) -> Result<LambdaBranches, ConcurrenceError> {
    let off = rho.off_x_magnitude();
    if off > X_TOL {
        return Err(ConcurrenceError::NotXState {
            max_off_pattern: off,
        });
    }
    let rho14 = rho.get(0, 3).norm();
    let re23 = rho.get(1, 2).re.abs();
    if rho14 > X_TOL || re23 > X_TOL {
        return Err(ConcurrenceError::NotClosedClass {
            rho14,
            re_rho23: re23,
        });
    }
    Ok(branches_unchecked(rho.bell()))
}

pub(crate) fn branches_unchecked(m: &Mat4) -> LambdaBranches {
    let r11 = m[(0, 0)].re;
    let r22 = m[(1, 1)].re;
    let r33 = m[(2, 2)].re;
    let r44 = m[(3, 3)].re;
    let diff = r22 - r33;
    let l3 = (diff * diff + 4.0 * m[(1, 2)].norm_sqr()).sqrt() - r11 - r44;
    LambdaBranches::from_branches(r11 - r22 - r33 - r44, r44 - r11 - r22 - r33, l3)
}

/// Branches inside the closed X class, Wootters [`LambdaBranches::general`]
/// otherwise.
pub fn branches_or_general(rho: &DensityMatrix) -> LambdaBranches {
    lambda_branches(rho).unwrap_or_else(|_| LambdaBranches::general(wootters_lambda(rho)))
}

/// `Λ` for any state.
pub fn lambda(rho: &DensityMatrix) -> f64 {
    branches_or_general(rho).selected
}

/// `Λ = 2 max ρ_ii − 1` for Bell-diagonal populations (written as
/// `2 max − Σ` so that unnormalised rounding cancels).
pub fn diagonal_lambda(p: &[f64; 4]) -> f64 {
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    2.0 * max - p.iter().sum::<f64>()
}
