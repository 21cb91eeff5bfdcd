//! Trajectories and closed orbits `H = h`.
//!
//! Orbits are seeded on the Poincare section `{y = 1, x > 1}` where
//! `dy/dt = alpha (x - 1) > 0`, so every closed orbit crosses it exactly once
//! per period, moving upward.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LvError, Result};
use crate::model::{energy_excess_log, hamiltonian, log_field, ModelParams, PhaseState};
use crate::ode::{Control, Dopri5, Segment, Tolerances};

/// Default relative tolerance for orbit work (absolute floor is 1e-12).
pub const DEFAULT_TOL: f64 = 1e-10;

/// Energy drift per unit time allowed at tolerance `tol` is
/// `ENERGY_DRIFT_CONSTANT * tol`.
pub const ENERGY_DRIFT_CONSTANT: f64 = 50.0;

/// Time cap for the period search, in units of the small-oscillation period.
pub const PERIOD_CAP_FACTOR: f64 = 100.0;

const EVENT_TIME_TOL: f64 = 1e-10;

/// Drift bound `|H(t) - H(0)|` over a window of length `t_span`.
pub fn energy_drift_bound(tol: f64, t_span: f64) -> f64 {
    ENERGY_DRIFT_CONSTANT * tol * t_span.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedState {
    pub t: f64,
    pub state: PhaseState,
}

/// Accepted-step samples of a solution plus its piecewise interpolant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TimedState>,
    pub tol: f64,
    #[serde(skip)]
    segments: Vec<Segment<2>>,
}

impl Trajectory {
    fn from_segments(start: [f64; 2], t0: f64, segments: Vec<Segment<2>>, tol: f64) -> Self {
        let mut samples = Vec::with_capacity(segments.len() + 1);
        samples.push(TimedState { t: t0, state: PhaseState::from_log(start[0], start[1]) });
        for seg in &segments {
            let [p, q] = seg.end();
            samples.push(TimedState { t: seg.t1(), state: PhaseState::from_log(p, q) });
        }
        Self { samples, tol, segments }
    }

    pub fn first(&self) -> &TimedState {
        &self.samples[0]
    }

    pub fn last(&self) -> &TimedState {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn duration(&self) -> f64 {
        self.last().t - self.first().t
    }

    /// Dense-output state at `t`, or `None` outside the covered window.
    pub fn state_at(&self, t: f64) -> Option<PhaseState> {
        if self.segments.is_empty() {
            return (t == self.first().t).then(|| self.first().state);
        }
        if t < self.first().t || t > self.last().t {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.t1() < t).min(self.segments.len() - 1);
        let [p, q] = self.segments[idx].eval(t);
        Some(PhaseState::from_log(p, q))
    }

    /// `n` states evenly spaced in time over the whole window, endpoints included.
    pub fn resample(&self, n: usize) -> Vec<TimedState> {
        let n = n.max(2);
        let (t0, span) = (self.first().t, self.duration());
        (0..n)
            .map(|i| {
                let t = if i + 1 == n { self.last().t } else { t0 + span * i as f64 / (n - 1) as f64 };
                let state = if i + 1 == n { self.last().state } else { self.state_at(t).unwrap() };
                TimedState { t, state }
            })
            .collect()
    }

    /// Largest deviation of `H` from its initial value over the dense samples.
    pub fn max_energy_drift(&self, params: ModelParams) -> f64 {
        let h0 = hamiltonian(self.first().state, params);
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            worst = worst.max((hamiltonian(s.state, params) - h0).abs());
        }
        for seg in &self.segments {
            for j in 1..4 {
                let [p, q] = seg.eval_theta(j as f64 / 4.0);
                worst = worst.max((hamiltonian(PhaseState::from_log(p, q), params) - h0).abs());
            }
        }
        worst
    }
}

fn solver(tol: f64) -> Result<Dopri5> {
    Ok(Dopri5::new(Tolerances::from_tol(tol)?))
}

/// Adaptive solve of the Lotka-Volterra equation from `start` over `[0, t_end]`.
pub fn integrate(start: PhaseState, params: ModelParams, t_end: f64, tol: f64) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("t_end must be positive, got {t_end}")));
    }
    let solver = solver(tol)?;
    let alpha = params.alpha();
    let field = move |_t: f64, z: &[f64; 2]| log_field(z, alpha);
    let y0 = start.log();
    let mut segments = Vec::new();
    solver.integrate(&field, 0.0, y0, t_end, |seg| {
        segments.push(seg.clone());
        Control::Continue
    })?;
    Ok(Trajectory::from_segments(y0, 0.0, segments, tol))
}

/// Positive root `p` of `alpha (e^p - p - 1) = excess`, i.e. `ln x` of the
/// section crossing with `x > 1`.
fn section_root(excess: f64, alpha: f64) -> f64 {
    let phi = |p: f64| alpha * (p.exp_m1() - p) - excess;
    let mut lo = 0.0;
    let mut hi = (2.0 * excess / alpha).sqrt().max(1e-300);
    while phi(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    // bisection to a coarse bracket, then Newton
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut p = 0.5 * (lo + hi);
    for _ in 0..20 {
        let dphi = alpha * p.exp_m1();
        if dphi <= 0.0 {
            break;
        }
        let next = (p - phi(p) / dphi).clamp(lo, hi);
        let done = (next - p).abs() <= 1e-16 * p.abs();
        p = next;
        if done {
            break;
        }
    }
    p
}

fn check_energy(h: f64, params: ModelParams) -> Result<f64> {
    let excess = h - params.h_min();
    if !(excess > 0.0) || !h.is_finite() {
        return Err(LvError::EnergyBelowMinimum { h, h_min: params.h_min() });
    }
    Ok(excess)
}

/// The section point `(x+, 1)` with `H(x+, 1) = h` and `x+ > 1`.
pub fn seed_point(h: f64, params: ModelParams) -> Result<PhaseState> {
    let excess = check_energy(h, params)?;
    Ok(PhaseState::from_log(section_root(excess, params.alpha()), 0.0))
}

/// Log-coordinate extremes `[p_min, p_max, q_min, q_max]` of the orbit `H = h`.
pub fn log_extent(h: f64, params: ModelParams) -> Result<[f64; 4]> {
    let excess = check_energy(h, params)?;
    let a = params.alpha();
    let negative_root = |scale: f64| {
        // root of scale (e^p - p - 1) = excess with p < 0
        let phi = |p: f64| scale * (p.exp_m1() - p) - excess;
        let mut lo = -(2.0 * excess / scale).sqrt().max(1e-300);
        let mut hi = 0.0;
        while phi(lo) <= 0.0 {
            hi = lo;
            lo *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if phi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok([negative_root(a), section_root(excess, a), negative_root(1.0), section_root(excess, 1.0)])
}

/// A closed orbit over exactly one period, starting on the section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Orbit {
    pub params: ModelParams,
    pub h: f64,
    pub period_tau: f64,
    pub dense: Trajectory,
    pub seed: PhaseState,
}

impl Orbit {
    pub fn alpha(&self) -> f64 {
        self.params.alpha()
    }

    pub fn tol(&self) -> f64 {
        self.dense.tol
    }

    /// Distance between the returned state and the seed.
    pub fn closure_error(&self) -> f64 {
        self.dense.last().state.distance(&self.seed)
    }

    pub(crate) fn seed_log(&self) -> [f64; 2] {
        [section_root(self.h - self.params.h_min(), self.params.alpha()), 0.0]
    }
}

/// Small-oscillation period `2 pi / sqrt(alpha)`.
pub fn linear_period(params: ModelParams) -> f64 {
    2.0 * PI / params.alpha().sqrt()
}

/// Integrates from the section seed to the next upward crossing of `y = 1`.
pub fn orbit_from_energy(h: f64, params: ModelParams, tol: f64) -> Result<Orbit> {
    check_energy(h, params)?;
    let solver = solver(tol)?;
    let alpha = params.alpha();
    let field = move |_t: f64, z: &[f64; 2]| log_field(z, alpha);
    let cap = PERIOD_CAP_FACTOR * linear_period(params);
    let seed_log = [section_root(h - params.h_min(), alpha), 0.0];

    let mut segments: Vec<Segment<2>> = Vec::new();
    let mut crossing: Option<usize> = None;
    solver.integrate(&field, 0.0, seed_log, cap, |seg| {
        let q0 = seg.start()[1];
        let [p1, q1] = seg.end();
        segments.push(seg.clone());
        if q0 < 0.0 && q1 >= 0.0 && p1 > 0.0 {
            crossing = Some(segments.len() - 1);
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    let idx = crossing.ok_or(LvError::PeriodNotFound { cap })?;
    let seg = segments.pop().expect("crossing segment");
    debug_assert_eq!(idx, segments.len());

    // bracket on the interpolant
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if seg.eval_theta(mid)[1] >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) * seg.h < 1e-3 * EVENT_TIME_TOL {
            break;
        }
    }
    // Newton on fresh single steps from the segment start
    let start = *seg.start();
    let mut s = 0.5 * (lo + hi) * seg.h;
    let mut last = solver.single_step(&field, seg.t0, &start, s);
    for _ in 0..8 {
        let [p, q] = last.end();
        let dq = alpha * p.exp_m1();
        let ds = -q / dq;
        s += ds;
        last = solver.single_step(&field, seg.t0, &start, s);
        if ds.abs() < 1e-3 * EVENT_TIME_TOL {
            break;
        }
    }
    let period_tau = seg.t0 + s;
    segments.push(last);
    let dense = Trajectory::from_segments(seed_log, 0.0, segments, tol);
    Ok(Orbit {
        params,
        h,
        period_tau,
        seed: PhaseState::from_log(seed_log[0], seed_log[1]),
        dense,
    })
}

/// Verifies `H(seed) = h` to the stated relative accuracy.
pub fn seed_residual(h: f64, params: ModelParams) -> Result<f64> {
    let seed = seed_point(h, params)?;
    let [p, q] = seed.log();
    Ok(((energy_excess_log(p, q, params) + params.h_min()) - h).abs() / h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(alpha: f64) -> ModelParams {
        ModelParams::new(alpha).unwrap()
    }

    #[test]
    fn seed_examples() {
        let e = std::f64::consts::E;
        let s = seed_point(e, p(1.0)).unwrap();
        assert!((s.x() - e).abs() < 1e-12);
        assert_eq!(s.y(), 1.0);
        assert!(matches!(seed_point(2.0, p(1.0)), Err(LvError::EnergyBelowMinimum { .. })));
        assert!(matches!(seed_point(1.9, p(1.0)), Err(LvError::EnergyBelowMinimum { .. })));
    }

    #[test]
    fn seed_near_minimum_follows_square_root_law() {
        // x - ln x - 1 ~ (x-1)^2 / 2, so x+ ~ 1 + sqrt(2 delta)
        for delta in [1e-6, 1e-8, 1e-10] {
            let s = seed_point(2.0 + delta, p(1.0)).unwrap();
            let expected = 1.0 + (2.0 * delta).sqrt();
            assert!(s.x() > 1.0);
            assert!(((s.x() - 1.0) - (expected - 1.0)).abs() / (expected - 1.0) < 1e-3);
        }
    }

    #[test]
    fn seed_hits_energy() {
        for alpha in [0.2, 1.0, 3.0] {
            for off in [1e-4, 0.5, 3.0, 12.0] {
                let h = alpha + 1.0 + off;
                assert!(seed_residual(h, p(alpha)).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_point_stays_put() {
        let tr = integrate(PhaseState::FIXED_POINT, p(1.0), 10.0, 1e-10).unwrap();
        for s in &tr.samples {
            assert_eq!(s.state, PhaseState::FIXED_POINT);
        }
        assert_eq!(tr.last().t, 10.0);
    }

    #[test]
    fn small_oscillation_returns_after_two_pi() {
        let start = PhaseState::new(1.01, 1.0).unwrap();
        let tr = integrate(start, p(1.0), 2.0 * PI, 1e-10).unwrap();
        let end = tr.last().state;
        // period exceeds 2 pi slightly at finite amplitude
        assert!(end.distance(&start) < 1e-4, "{end:?}");
    }

    #[test]
    fn times_strictly_increase() {
        let start = seed_point(2.61, p(1.0)).unwrap();
        let tr = integrate(start, p(1.0), 20.0, 1e-8).unwrap();
        assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert!(tr.max_energy_drift(p(1.0)) <= energy_drift_bound(1e-8, 20.0));
    }

    #[test]
    fn period_examples() {
        let o = orbit_from_energy(2.01, p(1.0), DEFAULT_TOL).unwrap();
        assert!((o.period_tau / (2.0 * PI) - 1.0).abs() < 0.01);
        let o = orbit_from_energy(5.01, p(4.0), DEFAULT_TOL).unwrap();
        assert!((o.period_tau / PI - 1.0).abs() < 0.01);
        assert!(matches!(
            orbit_from_energy(2.0, p(1.0), DEFAULT_TOL),
            Err(LvError::EnergyBelowMinimum { .. })
        ));
    }

    #[test]
    fn orbit_closes_and_conserves_energy() {
        let o = orbit_from_energy(2.61, p(1.0), DEFAULT_TOL).unwrap();
        assert!(o.closure_error() < 1e-6, "closure {}", o.closure_error());
        assert!(o.dense.max_energy_drift(o.params) < 1e-8);
        assert!((o.dense.last().t - o.period_tau).abs() < 1e-14);
    }

    #[test]
    fn state_at_interpolates() {
        let o = orbit_from_energy(2.61, p(1.0), DEFAULT_TOL).unwrap();
        let mid = o.dense.state_at(0.5 * o.period_tau).unwrap();
        assert!((hamiltonian(mid, o.params) - 2.61).abs() < 1e-8);
        assert!(o.dense.state_at(-1.0).is_none());
        let pts = o.dense.resample(50);
        assert_eq!(pts.len(), 50);
        assert_eq!(pts[0].state, o.seed);
    }

    #[test]
    fn extent_brackets_the_orbit() {
        let params = p(0.7);
        let [pmin, pmax, qmin, qmax] = log_extent(3.0, params).unwrap();
        let o = orbit_from_energy(3.0, params, DEFAULT_TOL).unwrap();
        for s in &o.dense.samples {
            let [pp, qq] = s.state.log();
            assert!(pp >= pmin - 1e-8 && pp <= pmax + 1e-8);
            assert!(qq >= qmin - 1e-8 && qq <= qmax + 1e-8);
        }
    }
}
