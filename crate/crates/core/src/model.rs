//! The Lotka-Volterra vector field, its conserved energy and the scalar
//! factor `G = xy` that turns it into a Hamiltonian flow after a time change.
//!
//! ```text
//! dx/dt = x (1 - y)          dy/dt = alpha y (x - 1)
//! H(x, y) = alpha x + y - alpha ln x - ln y
//! ```
//!
//! Integration happens in log coordinates `(p, q) = (ln x, ln y)`, where the
//! field becomes `(1 - e^q, alpha (e^p - 1))` and positivity is automatic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    alpha: f64,
}

impl ModelParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive and finite, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Energy of the coexistence fixed point `(1, 1)`.
    #[inline]
    pub fn h_min(&self) -> f64 {
        self.alpha + 1.0
    }
}

/// Normalized prey and predator densities, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    x: f64,
    y: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && x > 0.0 && y > 0.0) {
            return Err(invalid(format!("phase state must be positive, got ({x}, {y})")));
        }
        Ok(Self { x, y })
    }

    /// Builds a state from log coordinates; always positive.
    #[inline]
    pub fn from_log(p: f64, q: f64) -> Self {
        Self { x: p.exp(), y: q.exp() }
    }

    pub const FIXED_POINT: PhaseState = PhaseState { x: 1.0, y: 1.0 };

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn log(&self) -> [f64; 2] {
        [self.x.ln(), self.y.ln()]
    }

    pub fn distance(&self, other: &PhaseState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// `H(x, y) = alpha x + y - alpha ln x - ln y`.
#[inline]
pub fn hamiltonian(state: PhaseState, params: ModelParams) -> f64 {
    let a = params.alpha();
    a * state.x + state.y - a * state.x.ln() - state.y.ln()
}

/// `H - h_min` evaluated in log coordinates without cancellation near the
/// fixed point.
#[inline]
pub fn energy_excess_log(p: f64, q: f64, params: ModelParams) -> f64 {
    params.alpha() * (p.exp_m1() - p) + (q.exp_m1() - q)
}

#[inline]
pub fn vector_field(state: PhaseState, params: ModelParams) -> (f64, f64) {
    let (x, y) = (state.x, state.y);
    (x * (1.0 - y), params.alpha() * y * (x - 1.0))
}

/// `G(x, y) = xy`.
#[inline]
pub fn scalar_factor(state: PhaseState) -> f64 {
    state.x * state.y
}

/// Gradient `(H_x, H_y)`.
#[inline]
pub fn energy_gradient(state: PhaseState, params: ModelParams) -> (f64, f64) {
    (params.alpha() * (1.0 - 1.0 / state.x), 1.0 - 1.0 / state.y)
}

/// The vector field in log coordinates.
#[inline]
pub(crate) fn log_field(z: &[f64], alpha: f64) -> [f64; 2] {
    [-z[1].exp_m1(), alpha * z[0].exp_m1()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(alpha: f64) -> ModelParams {
        ModelParams::new(alpha).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(hamiltonian(PhaseState::FIXED_POINT, p(1.0)), 2.0);
        assert_eq!(hamiltonian(PhaseState::FIXED_POINT, p(0.5)), 1.5);
        let e = std::f64::consts::E;
        let h = hamiltonian(PhaseState::new(e, 1.0).unwrap(), p(1.0));
        assert!((h - e).abs() < 1e-15);
    }

    #[test]
    fn vector_field_examples() {
        for a in [0.3, 1.0, 4.0] {
            assert_eq!(vector_field(PhaseState::FIXED_POINT, p(a)), (0.0, 0.0));
        }
        assert_eq!(vector_field(PhaseState::new(2.0, 1.0).unwrap(), p(1.0)), (0.0, 1.0));
        assert_eq!(vector_field(PhaseState::new(1.0, 2.0).unwrap(), p(1.0)), (-1.0, 0.0));
    }

    #[test]
    fn scalar_factor_examples() {
        assert_eq!(scalar_factor(PhaseState::FIXED_POINT), 1.0);
        assert_eq!(scalar_factor(PhaseState::new(2.0, 3.0).unwrap()), 6.0);
        assert_eq!(scalar_factor(PhaseState::new(0.5, 0.5).unwrap()), 0.25);
    }

    #[test]
    fn field_is_g_times_rotated_gradient() {
        let params = p(0.7);
        for &(x, y) in &[(0.3, 2.0), (1.7, 0.4), (3.0, 3.0)] {
            let s = PhaseState::new(x, y).unwrap();
            let (f, g) = vector_field(s, params);
            let (hx, hy) = energy_gradient(s, params);
            let gf = scalar_factor(s);
            assert!((f + gf * hy).abs() < 1e-14);
            assert!((g - gf * hx).abs() < 1e-14);
            assert!((f * hx + g * hy).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ModelParams::new(0.0).is_err());
        assert!(ModelParams::new(-1.0).is_err());
        assert!(ModelParams::new(f64::NAN).is_err());
        assert!(PhaseState::new(0.0, 1.0).is_err());
        assert!(PhaseState::new(1.0, -2.0).is_err());
    }

    #[test]
    fn excess_matches_direct_energy() {
        let params = p(1.3);
        let s = PhaseState::new(1.8, 0.6).unwrap();
        let [pp, qq] = s.log();
        let direct = hamiltonian(s, params) - params.h_min();
        assert!((energy_excess_log(pp, qq, params) - direct).abs() < 1e-14);
    }
}
