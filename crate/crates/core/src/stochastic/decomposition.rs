//! Deterministic part of the divergence-form Fokker–Planck drift,
//! `F(x, y) - eps D grad ln G` with `D = diag(x(1 + y), alpha y (x + 1)) / 2`
//! and `G = xy`, and the linear stability of its fixed point.

use num_complex::Complex64;

use crate::error::{invalid, LvError, Result};
use crate::model::{ModelParams, PhaseState};

/// Central-difference step for the numeric Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;
const NEWTON_ITERS: usize = 50;
const NEWTON_TOL: f64 = 1e-14;

fn drift_raw(x: f64, y: f64, alpha: f64, eps: f64) -> [f64; 2] {
    // D grad ln G = (x(1+y)/x, alpha y(x+1)/y) / 2
    [
        x * (1.0 - y) - 0.5 * eps * (1.0 + y),
        alpha * y * (x - 1.0) - 0.5 * eps * alpha * (x + 1.0),
    ]
}

pub fn decomposition_drift(state: PhaseState, params: ModelParams, epsilon: f64) -> [f64; 2] {
    drift_raw(state.x(), state.y(), params.alpha(), epsilon)
}

fn jacobian(x: f64, y: f64, alpha: f64, eps: f64) -> [[f64; 2]; 2] {
    let s = JACOBIAN_STEP;
    let dx = {
        let (p, m) = (drift_raw(x + s, y, alpha, eps), drift_raw(x - s, y, alpha, eps));
        [(p[0] - m[0]) / (2.0 * s), (p[1] - m[1]) / (2.0 * s)]
    };
    let dy = {
        let (p, m) = (drift_raw(x, y + s, alpha, eps), drift_raw(x, y - s, alpha, eps));
        [(p[0] - m[0]) / (2.0 * s), (p[1] - m[1]) / (2.0 * s)]
    };
    [[dx[0], dy[0]], [dx[1], dy[1]]]
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon >= 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("epsilon must be nonnegative, got {epsilon}")))
    }
}

/// Newton iteration from `(1 + eps, 1 - eps)`.
pub fn locate_fixed_point(params: ModelParams, epsilon: f64) -> Result<PhaseState> {
    check_epsilon(epsilon)?;
    let a = params.alpha();
    let (mut x, mut y) = (1.0 + epsilon, 1.0 - epsilon);
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_ITERS {
        let f = drift_raw(x, y, a, epsilon);
        residual = f[0].hypot(f[1]);
        if residual <= NEWTON_TOL {
            break;
        }
        let j = jacobian(x, y, a, epsilon);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(LvError::FixedPointNotFound { residual });
        }
        x -= (j[1][1] * f[0] - j[0][1] * f[1]) / det;
        y -= (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        if !(x > 0.0 && y > 0.0) {
            return Err(LvError::FixedPointNotFound { residual });
        }
    }
    let f = drift_raw(x, y, a, epsilon);
    residual = residual.min(f[0].hypot(f[1]));
    if residual > 1e-12 {
        return Err(LvError::FixedPointNotFound { residual });
    }
    PhaseState::new(x, y)
}

/// Eigenvalues of a real 2x2 matrix, the one with nonnegative imaginary part first.
fn eigenvalues_2x2(j: [[f64; 2]; 2]) -> [Complex64; 2] {
    let half_tr = 0.5 * (j[0][0] + j[1][1]);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = half_tr * half_tr - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [Complex64::new(half_tr + r, 0.0), Complex64::new(half_tr - r, 0.0)]
    } else {
        let r = (-disc).sqrt();
        [Complex64::new(half_tr, r), Complex64::new(half_tr, -r)]
    }
}

/// Eigenvalues of the numeric Jacobian at the located fixed point.
pub fn fixed_point_eigenvalues(params: ModelParams, epsilon: f64) -> Result<[Complex64; 2]> {
    let fp = locate_fixed_point(params, epsilon)?;
    Ok(eigenvalues_2x2(jacobian(fp.x(), fp.y(), params.alpha(), epsilon)))
}

/// Eigenvalues of the numeric Jacobian at an arbitrary state.
pub fn jacobian_eigenvalues_at(state: PhaseState, params: ModelParams, epsilon: f64) -> [Complex64; 2] {
    eigenvalues_2x2(jacobian(state.x(), state.y(), params.alpha(), epsilon))
}

/// `eps (alpha + 1) / 2 +- i sqrt(alpha)`.
pub fn predicted_eigenvalues(params: ModelParams, epsilon: f64) -> [Complex64; 2] {
    let re = 0.5 * epsilon * (params.alpha() + 1.0);
    let im = params.alpha().sqrt();
    [Complex64::new(re, im), Complex64::new(re, -im)]
}
