//! Per-orbit state variables as time averages over one period.
//!
//! Every integral is carried as an extra component of the ODE state and
//! integrated alongside the flow, so it inherits the solver's error control.
//! Time averages over a period equal averages under the projected invariant
//! measure on the level set.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{energy_excess_log, ModelParams, PhaseState};
use crate::ode::{Control, Dopri5, Tolerances};
use crate::orbit::{log_extent, orbit_from_energy, Orbit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub h: f64,
    pub alpha: f64,
    pub tau: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    /// `<(x - 1)^2>`
    pub var_x: f64,
    /// `<(y - 1)^2>`; equals `alpha * var_x`.
    pub var_y: f64,
    /// Area of the enclosed region under `dx dy / (xy)`, from the `ln y` line integral.
    pub area_invariant: f64,
    /// The same area from the `ln x` line integral.
    pub area_invariant_check: f64,
    /// Lebesgue area of the enclosed region, `oint x dy`.
    pub area_lebesgue: f64,
    /// `<alpha (x - 1) ln x>`
    pub theta_x: f64,
    /// `<(y - 1) ln y>`
    pub theta_y: f64,
    /// `-<x - ln x>`
    pub f_alpha: f64,
    /// `-int_0^tau (x - ln x) dt`, the derivative of the area in alpha at fixed h.
    pub d_area_d_alpha: f64,
}

impl OrbitSummary {
    pub fn theta(&self) -> f64 {
        self.theta_y
    }

    pub fn f_alpha_abs(&self) -> f64 {
        -self.f_alpha
    }
}

/// Re-integrates the orbit over exactly one period with `N - 2` accumulators.
/// `acc` receives `(x, y, p, q)` and fills `out[2..]`.
pub(crate) fn period_pass<const N: usize, F>(orbit: &Orbit, acc: F) -> Result<[f64; N]>
where
    F: Fn(f64, f64, f64, f64, &mut [f64; N]),
{
    let solver = Dopri5::new(Tolerances::from_tol(orbit.tol())?);
    let alpha = orbit.alpha();
    let field = |_t: f64, z: &[f64; N]| {
        let (p, q) = (z[0], z[1]);
        let (xm1, ym1) = (p.exp_m1(), q.exp_m1());
        let mut out = [0.0; N];
        out[0] = -ym1;
        out[1] = alpha * xm1;
        acc(xm1 + 1.0, ym1 + 1.0, p, q, &mut out);
        out
    };
    let mut y0 = [0.0; N];
    let seed = orbit.seed_log();
    y0[0] = seed[0];
    y0[1] = seed[1];
    let (end, _, _) = solver.integrate(&field, 0.0, y0, orbit.period_tau, |_| Control::Continue)?;
    Ok(end)
}

/// `(1/tau) int_0^tau psi(x(t), y(t)) dt`.
pub fn time_average<F>(orbit: &Orbit, integrand: F) -> Result<f64>
where
    F: Fn(PhaseState) -> f64,
{
    let end: [f64; 3] = period_pass(orbit, |x, y, _p, _q, out| {
        out[2] = integrand(PhaseState::new(x, y).unwrap_or(PhaseState::FIXED_POINT));
    })?;
    Ok(end[2] / orbit.period_tau)
}

/// All per-orbit state variables from a single augmented pass.
pub fn summarize(orbit: &Orbit) -> Result<OrbitSummary> {
    let alpha = orbit.alpha();
    let end: [f64; 10] = period_pass(orbit, |x, y, p, q, out| {
        let (xm1, ym1) = (x - 1.0, y - 1.0);
        out[2] = x;
        out[3] = y;
        out[4] = xm1 * xm1;
        out[5] = ym1 * ym1;
        out[6] = q * ym1;
        out[7] = alpha * p * xm1;
        out[8] = x * alpha * y * xm1;
        out[9] = x - p;
    })?;
    let tau = orbit.period_tau;
    Ok(OrbitSummary {
        h: orbit.h,
        alpha,
        tau,
        mean_x: end[2] / tau,
        mean_y: end[3] / tau,
        var_x: end[4] / tau,
        var_y: end[5] / tau,
        area_invariant: end[6],
        area_invariant_check: end[7],
        area_lebesgue: end[8],
        theta_x: end[7] / tau,
        theta_y: end[6] / tau,
        f_alpha: -end[9] / tau,
        d_area_d_alpha: -end[9],
    })
}

/// Convenience: build the orbit at `(h, alpha)` and summarize it.
pub fn summary_at(h: f64, params: ModelParams, tol: f64) -> Result<OrbitSummary> {
    summarize(&orbit_from_energy(h, params, tol)?)
}

/// Midpoint indicator quadrature of `{H <= h}` in `(ln x, ln y)`; an
/// independent check on the line-integral area.
pub fn area_invariant_direct(h: f64, params: ModelParams, grid_n: usize) -> Result<f64> {
    if grid_n < 64 {
        return Err(invalid(format!("grid_n must be at least 64, got {grid_n}")));
    }
    let [pmin, pmax, qmin, qmax] = log_extent(h, params)?;
    let excess = h - params.h_min();
    let pad_p = 0.02 * (pmax - pmin);
    let pad_q = 0.02 * (qmax - qmin);
    let (p0, p1) = (pmin - pad_p, pmax + pad_p);
    let (q0, q1) = (qmin - pad_q, qmax + pad_q);
    let dp = (p1 - p0) / grid_n as f64;
    let dq = (q1 - q0) / grid_n as f64;
    let mut inside = 0usize;
    for i in 0..grid_n {
        let p = p0 + (i as f64 + 0.5) * dp;
        for j in 0..grid_n {
            let q = q0 + (j as f64 + 0.5) * dq;
            if energy_excess_log(p, q, params) <= excess {
                inside += 1;
            }
        }
    }
    Ok(inside as f64 * dp * dq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::DEFAULT_TOL;
    use std::f64::consts::PI;

    fn orbit(h: f64, alpha: f64) -> Orbit {
        orbit_from_energy(h, ModelParams::new(alpha).unwrap(), DEFAULT_TOL).unwrap()
    }

    #[test]
    fn averages_of_constants_and_coordinates() {
        let o = orbit(2.61, 1.0);
        assert!((time_average(&o, |_| 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((time_average(&o, |s| s.x()).unwrap() - 1.0).abs() < 1e-6);
        assert!((time_average(&o, |s| s.y()).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn small_orbit_state_variables() {
        // quadratic normal form: theta ~ h - h_min, <(x-1)^2> ~ dh / alpha
        let s = summarize(&orbit(2.01, 1.0)).unwrap();
        assert!((s.theta() - 0.01).abs() < 1e-4, "theta {}", s.theta());
        assert!((s.f_alpha + 1.005).abs() < 1e-3, "F {}", s.f_alpha);
    }

    #[test]
    fn variance_ratio_is_alpha_at_unit_alpha() {
        let s = summarize(&orbit(2.61, 1.0)).unwrap();
        assert!((s.var_y / s.var_x - 1.0).abs() < 1e-6);
    }

    #[test]
    fn variance_identities_against_lebesgue_area() {
        // int (x-1)^2 dt = A_leb / alpha and int (y-1)^2 dt = A_leb, so the
        // variance ratio is alpha (linearization: p = c cos(sqrt(a) t), q = c sqrt(a) sin(sqrt(a) t))
        for (h, a) in [(3.2, 2.0), (2.1, 0.5), (4.5, 1.0)] {
            let s = summarize(&orbit(h, a)).unwrap();
            assert!((s.var_x * a * s.tau / s.area_lebesgue - 1.0).abs() < 1e-6);
            assert!((s.var_y * s.tau / s.area_lebesgue - 1.0).abs() < 1e-6);
            assert!((s.var_y / s.var_x / a - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn signs() {
        for (h, a) in [(2.01, 1.0), (2.61, 1.0), (3.0, 0.5), (6.0, 3.0)] {
            let s = summarize(&orbit(h, a)).unwrap();
            assert!(s.theta_x > 0.0 && s.theta_y > 0.0);
            assert!(s.f_alpha <= -1.0);
            assert!((s.area_invariant - s.area_invariant_check).abs() < 1e-8);
        }
    }

    #[test]
    fn direct_area_examples() {
        let one = ModelParams::new(1.0).unwrap();
        let four = ModelParams::new(4.0).unwrap();
        let a = area_invariant_direct(2.01, one, 256).unwrap();
        assert!((a / (2.0 * PI * 0.01) - 1.0).abs() < 0.02, "{a}");
        let a = area_invariant_direct(5.01, four, 256).unwrap();
        assert!((a / (PI * 0.01) - 1.0).abs() < 0.02, "{a}");
        let tiny = area_invariant_direct(2.0 + 1e-12, one, 64).unwrap();
        assert!(tiny < 1e-10);
        assert!(area_invariant_direct(2.61, one, 32).is_err());
        assert!(area_invariant_direct(2.0, one, 64).is_err());
    }

    #[test]
    fn direct_area_agrees_with_line_integral() {
        for (h, a) in [(2.61, 1.0), (3.0, 0.5), (4.0, 2.0)] {
            let params = ModelParams::new(a).unwrap();
            let s = summarize(&orbit(h, a)).unwrap();
            let direct = area_invariant_direct(h, params, 1024).unwrap();
            assert!((direct / s.area_invariant - 1.0).abs() < 2e-3, "{direct} vs {}", s.area_invariant);
        }
    }
}
