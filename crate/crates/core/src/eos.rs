//! Cross-orbit structure: derivatives of the invariant area `A(h, alpha)`,
//! the extended conservation law `dh = theta dlnA - F_alpha dalpha`, and
//! equation-of-state tables.
//!
//! Partial derivatives use central differences with one Richardson level.
//! Derivatives in `alpha` hold `h` fixed by re-seeding the orbit at the new
//! `alpha`, not by keeping the initial condition.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LvError, Result};
use crate::exec::{map_slice, Execution};
use crate::model::ModelParams;
use crate::orbit::DEFAULT_TOL;
use crate::stats::summary_at;

pub const DEFAULT_ALPHAS: [f64; 5] = [0.5, 0.6, 0.8, 1.0, 1.2];

/// Default finite-difference step for derivatives in `h`.
pub fn default_step(h: f64) -> f64 {
    1e-4 * h.max(1.0)
}

/// `n` offsets above `h_min`, log-spaced over `[1e-2, 2]`.
pub fn default_offsets(n: usize) -> Vec<f64> {
    log_space(1e-2, 2.0, n)
}

/// `n` log-spaced points from `lo` to `hi`, both included exactly.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i + 1 == n {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Invariant-measure area enclosed by the orbit `H = h`.
pub fn area_invariant(h: f64, params: ModelParams, tol: f64) -> Result<f64> {
    Ok(summary_at(h, params, tol)?.area_invariant)
}

fn richardson(step: f64, diff: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let coarse = diff(step)?;
    let fine = diff(0.5 * step)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `(dA/dh)_alpha`, which equals the period `tau(h, alpha)`.
pub fn d_area_d_h(h: f64, params: ModelParams, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(invalid(format!("finite-difference step must be positive, got {step}")));
    }
    if !(h - step > params.h_min()) {
        return Err(LvError::EnergyBelowMinimum { h: h - step, h_min: params.h_min() });
    }
    richardson(step, |s| {
        let up = area_invariant(h + s, params, DEFAULT_TOL)?;
        let down = area_invariant(h - s, params, DEFAULT_TOL)?;
        Ok((up - down) / (2.0 * s))
    })
}

/// `(dA/dalpha)_h` by finite differences, re-seeding at each `alpha`.
pub fn d_area_d_alpha(h: f64, params: ModelParams, step: f64) -> Result<f64> {
    let a = params.alpha();
    if !(step > 0.0 && step < a) {
        return Err(invalid(format!("alpha step must lie in (0, alpha), got {step}")));
    }
    let upper = ModelParams::new(a + step)?;
    if !(h > upper.h_min()) {
        return Err(LvError::EnergyBelowMinimum { h, h_min: upper.h_min() });
    }
    richardson(step, |s| {
        let up = area_invariant(h, ModelParams::new(a + s)?, DEFAULT_TOL)?;
        let down = area_invariant(h, ModelParams::new(a - s)?, DEFAULT_TOL)?;
        Ok((up - down) / (2.0 * s))
    })
}

/// Ecological activeness `<(y - 1) ln y>`.
pub fn theta_fn(h: f64, params: ModelParams) -> Result<f64> {
    Ok(summary_at(h, params, DEFAULT_TOL)?.theta_y)
}

/// `F_alpha = -<x - ln x>`.
pub fn f_alpha_fn(h: f64, params: ModelParams) -> Result<f64> {
    Ok(summary_at(h, params, DEFAULT_TOL)?.f_alpha)
}

/// `A / (dA/dh)`, the area route to `theta`.
pub fn theta_from_area(h: f64, params: ModelParams, step: f64) -> Result<f64> {
    Ok(area_invariant(h, params, DEFAULT_TOL)? / d_area_d_h(h, params, step)?)
}

/// `(dA/dalpha)_h / (dA/dh)_alpha`, the finite-difference route to `F_alpha`.
pub fn f_alpha_from_area(h: f64, params: ModelParams, step_h: f64, step_alpha: f64) -> Result<f64> {
    Ok(d_area_d_alpha(h, params, step_alpha)? / d_area_d_h(h, params, step_h)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelmholtzResidual {
    pub dh_actual: f64,
    pub dh_predicted: f64,
    pub residual: f64,
    pub step_h: f64,
    pub step_alpha: f64,
}

/// Compares the actual energy change between `(h, alpha)` and
/// `(h + d_h, alpha + d_alpha)` with `theta dlnA - F_alpha dalpha`.
pub fn helmholtz_residual(h: f64, params: ModelParams, d_h: f64, d_alpha: f64) -> Result<HelmholtzResidual> {
    let moved = ModelParams::new(params.alpha() + d_alpha)?;
    if !(h + d_h > moved.h_min()) {
        return Err(LvError::EnergyBelowMinimum { h: h + d_h, h_min: moved.h_min() });
    }
    let base = summary_at(h, params, DEFAULT_TOL)?;
    let area_moved = area_invariant(h + d_h, moved, DEFAULT_TOL)?;
    let dln_area = (area_moved / base.area_invariant).ln();
    let dh_predicted = base.theta_y * dln_area - base.f_alpha * d_alpha;
    Ok(HelmholtzResidual {
        dh_actual: d_h,
        dh_predicted,
        residual: d_h - dh_predicted,
        step_h: d_h,
        step_alpha: d_alpha,
    })
}

/// One row of the equation-of-state table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EosRecord {
    pub alpha: f64,
    pub h: f64,
    pub tau: f64,
    pub area_a: f64,
    pub ln_area: f64,
    pub theta: f64,
    pub f_alpha_abs: f64,
    pub area_lebesgue: f64,
}

/// A grid cell; failures are kept in place rather than aborting the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EosCell {
    pub alpha: f64,
    pub h: f64,
    pub outcome: std::result::Result<EosRecord, LvError>,
}

fn eos_record(alpha: f64, h: f64, tol: f64) -> Result<EosRecord> {
    let s = summary_at(h, ModelParams::new(alpha)?, tol)?;
    Ok(EosRecord {
        alpha,
        h,
        tau: s.tau,
        area_a: s.area_invariant,
        ln_area: s.area_invariant.ln(),
        theta: s.theta_y,
        f_alpha_abs: -s.f_alpha,
        area_lebesgue: s.area_lebesgue,
    })
}

/// One cell per `(alpha, h)` pair, in input order.
pub fn eos_cells(pairs: &[(f64, f64)], tol: f64, exec: Execution) -> Vec<EosCell> {
    map_slice(exec, pairs, |&(alpha, h)| EosCell { alpha, h, outcome: eos_record(alpha, h, tol) })
}

/// Grid over `alpha` (major) and `h = alpha + 1 + offset` (minor).
pub fn eos_grid(alphas: &[f64], offsets: &[f64], tol: f64, exec: Execution) -> Vec<EosCell> {
    let pairs: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| offsets.iter().map(move |&o| (a, a + 1.0 + o)))
        .collect();
    eos_cells(&pairs, tol, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::orbit_from_energy;
    use std::f64::consts::PI;

    fn p(a: f64) -> ModelParams {
        ModelParams::new(a).unwrap()
    }

    #[test]
    fn area_slope_is_the_period() {
        let tau = orbit_from_energy(2.5, p(1.0), DEFAULT_TOL).unwrap().period_tau;
        let slope = d_area_d_h(2.5, p(1.0), 1e-4).unwrap();
        assert!((slope / tau - 1.0).abs() < 1e-4, "{slope} vs {tau}");
    }

    #[test]
    fn area_slope_near_minimum() {
        let s = d_area_d_h(2.0 + 1e-3, p(1.0), 1e-4).unwrap();
        assert!((s / (2.0 * PI) - 1.0).abs() < 1e-3);
        let s = d_area_d_h(5.0 + 1e-3, p(4.0), 1e-4).unwrap();
        assert!((s / PI - 1.0).abs() < 1e-3);
        assert!(d_area_d_h(2.0 + 1e-5, p(1.0), 1e-4).is_err());
    }

    #[test]
    fn theta_and_force_limits() {
        let t = theta_fn(2.0 + 1e-6, p(1.0)).unwrap();
        assert!(t.abs() < 2e-6);
        let f = f_alpha_fn(2.0 + 1e-6, p(1.0)).unwrap();
        assert!((f + 1.0).abs() < 1e-5);
        let t = theta_fn(2.01, p(1.0)).unwrap();
        assert!((t - 0.01).abs() < 1e-4);
    }

    #[test]
    fn helmholtz_pure_energy_change() {
        let r1 = helmholtz_residual(2.61, p(1.0), 1e-3, 0.0).unwrap();
        let r2 = helmholtz_residual(2.61, p(1.0), 5e-4, 0.0).unwrap();
        assert!(r1.residual.abs() < 1e-5);
        let ratio = r1.residual / r2.residual;
        assert!((ratio - 4.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn helmholtz_iso_energy() {
        let r1 = helmholtz_residual(2.61, p(1.0), 0.0, 1e-3).unwrap();
        let r2 = helmholtz_residual(2.61, p(1.0), 0.0, 5e-4).unwrap();
        assert!(r1.residual.abs() < 1e-5);
        assert!((r1.residual / r2.residual - 4.0).abs() < 1.0);
    }

    #[test]
    fn grid_ordering_and_error_rows() {
        let cells = eos_grid(&[0.5, 1.0], &[0.1, 1.0], DEFAULT_TOL, Execution::Parallel);
        let keys: Vec<(f64, f64)> = cells.iter().map(|c| (c.alpha, c.h)).collect();
        assert_eq!(keys, vec![(0.5, 1.6), (0.5, 2.5), (1.0, 2.1), (1.0, 3.0)]);
        assert!(cells.iter().all(|c| c.outcome.is_ok()));
        let bad = eos_cells(&[(1.0, 1.5), (1.0, 2.61)], DEFAULT_TOL, Execution::Sequential);
        assert!(matches!(bad[0].outcome, Err(LvError::EnergyBelowMinimum { .. })));
        assert!(bad[1].outcome.is_ok());
    }

    #[test]
    fn single_cell_is_finite_and_positive() {
        let c = &eos_cells(&[(1.0, 2.61)], DEFAULT_TOL, Execution::Sequential)[0];
        let r = c.outcome.as_ref().unwrap();
        for v in [r.tau, r.area_a, r.theta, r.f_alpha_abs, r.area_lebesgue] {
            assert!(v.is_finite() && v > 0.0);
        }
        assert!(r.f_alpha_abs >= 1.0);
    }

    #[test]
    fn area_shrinks_with_alpha() {
        let areas: Vec<f64> = [0.5, 0.6, 0.8, 1.2]
            .iter()
            .map(|&a| area_invariant(2.61, p(a), DEFAULT_TOL).unwrap())
            .collect();
        assert!(areas.windows(2).all(|w| w[1] < w[0]), "{areas:?}");
    }

    #[test]
    fn offsets_are_log_spaced() {
        let o = default_offsets(5);
        assert_eq!(o.len(), 5);
        assert!((o[0] - 1e-2).abs() < 1e-15 && o[4] == 2.0);
        assert!(o.windows(2).all(|w| w[1] > w[0]));
    }
}
