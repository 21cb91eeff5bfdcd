//! Averaged one-dimensional diffusion of the energy `H_t` under small noise:
//! drift `eps b(h)`, noise `sqrt(eps) A(h)`, and the unnormalized stationary
//! density `p(h) = A(h)^-2 exp(2 int_{h_ref}^h b / A^2)`.
//!
//! The density is not normalizable: it grows without bound as `h -> inf` and
//! diverges as `h -> alpha + 1` where `A -> 0`.

use serde::{Deserialize, Serialize};

use crate::eos::log_space;
use crate::error::{invalid, LvError, Result};
use crate::exec::{map_slice, Execution};
use crate::model::{hamiltonian, ModelParams};
use crate::orbit::{orbit_from_energy, DEFAULT_TOL};
use crate::stats::period_pass;
use crate::stochastic::SdePath;

/// Which coefficient formulas to average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientForm {
    /// `b = <(1+y)/x + alpha(x+1)/y> / 2`,
    /// `sigma^2 = alpha^2 [(x-1)^2 (1+y)/x + (y-1)^2 (x+1)/y]`.
    #[default]
    Literal,
    /// Itô's formula applied to `H` under the diffusion limit:
    /// `b = alpha <(1+y)/x + (x+1)/y> / 2`,
    /// `sigma^2 = alpha^2 (x-1)^2 (1+y)/x + alpha (y-1)^2 (x+1)/y`.
    /// Coincides with `Literal` at `alpha = 1`.
    ItoDerived,
}

/// How the local noise amplitude `sigma` is averaged over the orbit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseAverage {
    /// `A = <sigma>`
    #[default]
    MeanOfRoot,
    /// `A = sqrt(<sigma^2>)`
    RootMeanSquare,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HDiffusionMode {
    pub form: CoefficientForm,
    pub average: NoiseAverage,
}

/// Default grid size and offset range above `alpha + 1`.
pub const DEFAULT_GRID_POINTS: usize = 64;
pub const DEFAULT_OFFSET_RANGE: (f64, f64) = (1e-3, 10.0);

pub fn default_h_grid(params: ModelParams) -> Vec<f64> {
    let (lo, hi) = DEFAULT_OFFSET_RANGE;
    log_space(lo, hi, DEFAULT_GRID_POINTS)
        .into_iter()
        .map(|o| params.h_min() + o)
        .collect()
}

pub fn default_h_ref(params: ModelParams) -> f64 {
    params.h_min() + 1.0
}

/// `(b, A)` with the default mode.
pub fn averaged_coefficients(h: f64, params: ModelParams) -> Result<(f64, f64)> {
    averaged_coefficients_with(h, params, HDiffusionMode::default(), DEFAULT_TOL)
}

pub fn averaged_coefficients_with(h: f64, params: ModelParams, mode: HDiffusionMode, tol: f64) -> Result<(f64, f64)> {
    let orbit = orbit_from_energy(h, params, tol)?;
    let a = params.alpha();
    let end: [f64; 5] = period_pass(&orbit, |x, y, _p, _q, out| {
        let (u, v) = ((1.0 + y) / x, (x + 1.0) / y);
        let (dx2, dy2) = ((x - 1.0).powi(2) * u, (y - 1.0).powi(2) * v);
        let (b, s2) = match mode.form {
            CoefficientForm::Literal => (0.5 * (u + a * v), a * a * (dx2 + dy2)),
            CoefficientForm::ItoDerived => (0.5 * a * (u + v), a * a * dx2 + a * dy2),
        };
        out[2] = b;
        out[3] = s2.sqrt();
        out[4] = s2;
    })?;
    let tau = orbit.period_tau;
    let b = end[2] / tau;
    let amp = match mode.average {
        NoiseAverage::MeanOfRoot => end[3] / tau,
        NoiseAverage::RootMeanSquare => (end[4] / tau).sqrt(),
    };
    Ok((b, amp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HDiffusionTable {
    pub alpha: f64,
    pub h_ref: f64,
    pub mode: HDiffusionMode,
    pub h_grid: Vec<f64>,
    pub b_values: Vec<f64>,
    pub a_values: Vec<f64>,
    pub pss_values: Vec<f64>,
    /// Grid points removed because `A` vanished there.
    pub dropped: Vec<f64>,
}

impl HDiffusionTable {
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        (0..self.h_grid.len()).map(|i| (self.h_grid[i], self.b_values[i], self.a_values[i], self.pss_values[i]))
    }
}

pub fn pss_curve(params: ModelParams, h_grid: &[f64], h_ref: f64, exec: Execution) -> Result<HDiffusionTable> {
    pss_curve_with(params, h_grid, h_ref, HDiffusionMode::default(), DEFAULT_TOL, exec)
}

/// Tabulates `b` and `A` on the grid (with `h_ref` inserted if absent) and
/// integrates `b / A^2` by the trapezoid rule outward from `h_ref`.
pub fn pss_curve_with(
    params: ModelParams,
    h_grid: &[f64],
    h_ref: f64,
    mode: HDiffusionMode,
    tol: f64,
    exec: Execution,
) -> Result<HDiffusionTable> {
    if h_grid.len() < 2 {
        return Err(invalid("h grid needs at least two points"));
    }
    if !h_grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(invalid("h grid must be strictly increasing"));
    }
    let h_min = params.h_min();
    if let Some(&h) = h_grid.iter().find(|&&h| !(h > h_min)) {
        return Err(LvError::EnergyBelowMinimum { h, h_min });
    }
    let (lo, hi) = (h_grid[0], h_grid[h_grid.len() - 1]);
    if !(h_ref >= lo && h_ref <= hi) {
        return Err(invalid(format!("h_ref {h_ref} outside grid range [{lo}, {hi}]")));
    }
    let mut grid = h_grid.to_vec();
    if let Err(pos) = grid.binary_search_by(|v| v.total_cmp(&h_ref)) {
        grid.insert(pos, h_ref);
    }

    let coeffs = map_slice(exec, &grid, |&h| averaged_coefficients_with(h, params, mode, tol));
    let mut kept = Vec::with_capacity(grid.len());
    let mut dropped = Vec::new();
    for (&h, c) in grid.iter().zip(coeffs) {
        let (b, a) = c?;
        if a * a > f64::MIN_POSITIVE && (b / (a * a)).is_finite() {
            kept.push((h, b, a));
        } else if h == h_ref {
            return Err(LvError::SingularCoefficient { h });
        } else {
            log::warn!("dropping h = {h}: averaged noise coefficient {a:e} vanishes");
            dropped.push(h);
        }
    }
    if kept.len() < 2 {
        return Err(LvError::SingularCoefficient { h: grid[0] });
    }

    let n = kept.len();
    let r = kept.iter().position(|k| k.0 == h_ref).expect("h_ref kept");
    let g: Vec<f64> = kept.iter().map(|&(_, b, a)| b / (a * a)).collect();
    let mut integral = vec![0.0; n];
    for i in r + 1..n {
        integral[i] = integral[i - 1] + 0.5 * (g[i] + g[i - 1]) * (kept[i].0 - kept[i - 1].0);
    }
    for i in (0..r).rev() {
        integral[i] = integral[i + 1] - 0.5 * (g[i] + g[i + 1]) * (kept[i + 1].0 - kept[i].0);
    }
    let pss_values = kept
        .iter()
        .zip(&integral)
        .map(|(&(_, _, a), &s)| (2.0 * s).exp() / (a * a))
        .collect();
    Ok(HDiffusionTable {
        alpha: params.alpha(),
        h_ref,
        mode,
        h_grid: kept.iter().map(|k| k.0).collect(),
        b_values: kept.iter().map(|k| k.1).collect(),
        a_values: kept.iter().map(|k| k.2).collect(),
        pss_values,
        dropped,
    })
}

/// `(t, H(x_t, y_t))` for every sample of the path.
pub fn h_path_extract(path: &SdePath, params: ModelParams) -> Vec<(f64, f64)> {
    path.samples.iter().map(|s| (s.t, hamiltonian(s.state, params))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhaseState;
    use crate::stochastic::{sde_simulate, SdeConfig};

    fn p(a: f64) -> ModelParams {
        ModelParams::new(a).unwrap()
    }

    #[test]
    fn limits_at_the_fixed_point() {
        for a in [0.5, 1.0, 2.0] {
            let (b, amp) = averaged_coefficients(a + 1.0 + 1e-6, p(a)).unwrap();
            assert!((b - (1.0 + a)).abs() < 1e-4, "{b}");
            assert!(amp < 1e-2, "{amp}");
        }
    }

    #[test]
    fn drift_grows_away_from_center() {
        let (b, _) = averaged_coefficients(2.61, p(1.0)).unwrap();
        assert!(b > 2.0);
    }

    #[test]
    fn modes_agree_at_unit_alpha() {
        let lit = averaged_coefficients(2.61, p(1.0)).unwrap();
        let ito = HDiffusionMode { form: CoefficientForm::ItoDerived, average: NoiseAverage::MeanOfRoot };
        let der = averaged_coefficients_with(2.61, p(1.0), ito, DEFAULT_TOL).unwrap();
        assert!((lit.0 - der.0).abs() < 1e-10 && (lit.1 - der.1).abs() < 1e-10);
    }

    #[test]
    fn rms_dominates_mean_of_root() {
        let rms = HDiffusionMode { average: NoiseAverage::RootMeanSquare, ..Default::default() };
        let (_, m) = averaged_coefficients(3.0, p(0.7)).unwrap();
        let (_, r) = averaged_coefficients_with(3.0, p(0.7), rms, DEFAULT_TOL).unwrap();
        assert!(r >= m);
    }

    #[test]
    fn reference_point_normalization() {
        let grid = [2.1, 2.5, 3.0, 4.0];
        let t = pss_curve(p(1.0), &grid, 3.5, Execution::Sequential).unwrap();
        assert_eq!(t.h_grid, vec![2.1, 2.5, 3.0, 3.5, 4.0]);
        let i = 3;
        assert!((t.pss_values[i] * t.a_values[i].powi(2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_grids() {
        let e = pss_curve(p(1.0), &[1.9, 2.5], 2.2, Execution::Sequential);
        assert!(matches!(e, Err(LvError::EnergyBelowMinimum { .. })));
        assert!(pss_curve(p(1.0), &[2.5, 2.2], 2.3, Execution::Sequential).is_err());
        assert!(pss_curve(p(1.0), &[2.2, 2.5], 3.0, Execution::Sequential).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_h_grid(p(1.0));
        assert_eq!(g.len(), 64);
        assert!((g[0] - 2.001).abs() < 1e-12 && (g[63] - 12.0).abs() < 1e-12);
        assert_eq!(default_h_ref(p(1.0)), 3.0);
    }

    #[test]
    fn noiseless_energy_path_is_flat() {
        let start = PhaseState::new(1.3, 1.0).unwrap();
        let path = sde_simulate(start, p(1.0), SdeConfig::new(0.0, 1e-4, 0.5), 0).unwrap();
        let hs = h_path_extract(&path, p(1.0));
        let h0 = hs[0].1;
        assert!(hs.iter().all(|&(_, h)| (h - h0).abs() < 1e-4));
    }
}
