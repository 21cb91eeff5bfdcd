//! Dormand-Prince 5(4) integrator with the classical fourth-order dense
//! output (Hairer, Norsett & Wanner, "Solving ODEs I", DOPRI5).
//!
//! The integrator is forward-only and works on fixed-size states. Every
//! accepted step is handed to an observer as a [`Segment`] that can be
//! evaluated anywhere inside the step.

use crate::error::{invalid, LvError, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerances {
    /// Relative tolerance `tol` with an absolute floor two decades lower.
    pub fn from_tol(tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol <= 1e-3) {
            return Err(invalid(format!("tolerance must lie in (0, 1e-3], got {tol}")));
        }
        Ok(Self { rel: tol, abs: tol * 1e-2 })
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-12 }
    }
}

/// One accepted step together with its interpolant.
#[derive(Debug, Clone)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    #[inline]
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    #[inline]
    pub fn start(&self) -> &[f64; N] {
        &self.rcont[0]
    }

    pub fn end(&self) -> [f64; N] {
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.rcont[0][i] + self.rcont[1][i];
        }
        y
    }

    /// Interpolated state at `t`; `t` is clamped to the step.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        self.eval_theta(theta)
    }

    pub fn eval_theta(&self, theta: f64) -> [f64; N] {
        let theta1 = 1.0 - theta;
        let r = &self.rcont;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = r[0][i]
                + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
        }
        y
    }
}

/// Observer verdict after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub tol: Tolerances,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { tol: Tolerances::default(), max_steps: 2_000_000, h_max: f64::INFINITY }
    }
}

struct Stages<const N: usize> {
    k: [[f64; N]; 7],
    y_new: [f64; N],
}

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol, ..Self::default() }
    }

    fn stages<F, const N: usize>(f: &F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Stages<N>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut tmp = [0.0; N];
        for i in 0..N {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = f(t + C2 * h, &tmp);
        for i in 0..N {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = f(t + C3 * h, &tmp);
        for i in 0..N {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = f(t + C4 * h, &tmp);
        for i in 0..N {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = f(t + C5 * h, &tmp);
        for i in 0..N {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let k6 = f(t + h, &tmp);
        let mut y_new = [0.0; N];
        for i in 0..N {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let k7 = f(t + h, &y_new);
        Stages { k: [*k1, k2, k3, k4, k5, k6, k7], y_new }
    }

    fn segment<const N: usize>(t: f64, y: &[f64; N], h: f64, s: &Stages<N>) -> Segment<N> {
        let k = &s.k;
        let mut rcont = [[0.0; N]; 5];
        for i in 0..N {
            let ydiff = s.y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            rcont[0][i] = y[i];
            rcont[1][i] = ydiff;
            rcont[2][i] = bspl;
            rcont[3][i] = ydiff - h * k[6][i] - bspl;
            rcont[4][i] = h
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        Segment { t0: t, h, rcont }
    }

    /// A single unconditional step of size `h` from `(t, y)`.
    pub fn single_step<F, const N: usize>(&self, f: &F, t: f64, y: &[f64; N], h: f64) -> Segment<N>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let k1 = f(t, y);
        let stages = Self::stages(f, t, y, &k1, h);
        Self::segment(t, y, h, &stages)
    }

    fn initial_step<F, const N: usize>(&self, f: &F, t: f64, y: &[f64; N], k1: &[f64; N]) -> f64
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let sc = |i: usize, v: f64| self.tol.abs + self.tol.rel * v.abs().max(y[i].abs());
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..N {
            let s = sc(i, y[i]);
            dnf += (k1[i] / s).powi(2);
            dny += (y[i] / s).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * (dny / dnf).sqrt() };
        h = h.min(self.h_max);
        let mut y1 = [0.0; N];
        for i in 0..N {
            y1[i] = y[i] + h * k1[i];
        }
        let k2 = f(t + h, &y1);
        let mut der2 = 0.0;
        for i in 0..N {
            der2 += ((k2[i] - k1[i]) / sc(i, y[i])).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
        (100.0 * h).min(h1).min(self.h_max)
    }

    /// Integrates from `t0` to `t_end`, landing exactly on `t_end`. The
    /// observer sees every accepted step and may stop early.
    pub fn integrate<F, O, const N: usize>(
        &self,
        f: &F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        mut observer: O,
    ) -> Result<([f64; N], f64, Stats)>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        O: FnMut(&Segment<N>) -> Control,
    {
        if !(t_end >= t0) {
            return Err(invalid(format!("integration window [{t0}, {t_end}] is reversed")));
        }
        let mut stats = Stats::default();
        let mut t = t0;
        let mut y = y0;
        if t_end == t0 {
            return Ok((y, t, stats));
        }
        let mut k1 = f(t, &y);
        stats.evaluations += 1;
        let mut h = self.initial_step(f, t, &y, &k1);
        stats.evaluations += 1;

        const SAFETY: f64 = 0.9;
        const FAC_MIN: f64 = 0.2;
        const FAC_MAX: f64 = 10.0;
        const BETA: f64 = 0.04;
        let expo = 0.2 - BETA * 0.75;
        let mut fac_old: f64 = 1e-4;
        let mut last_rejected = false;

        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(LvError::StepBudgetExhausted { t, max_steps: self.max_steps });
            }
            if h.abs() <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(LvError::StepSizeUnderflow { t, step: h });
            }
            let mut last = false;
            if t + 1.01 * h >= t_end {
                h = t_end - t;
                last = true;
            }

            let stages = Self::stages(f, t, &y, &k1, h);
            stats.evaluations += 6;

            let mut err = 0.0;
            for i in 0..N {
                let est = h
                    * (E1 * stages.k[0][i] + E3 * stages.k[2][i] + E4 * stages.k[3][i]
                        + E5 * stages.k[4][i] + E6 * stages.k[5][i] + E7 * stages.k[6][i]);
                let sc = self.tol.abs + self.tol.rel * y[i].abs().max(stages.y_new[i].abs());
                err += (est / sc).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() {
                stats.rejected += 1;
                h *= FAC_MIN;
                last_rejected = true;
                continue;
            }

            let fac11 = err.powf(expo);
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;

            if err <= 1.0 {
                fac_old = err.max(1e-4);
                stats.accepted += 1;
                let seg = Self::segment(t, &y, h, &stages);
                let t_next = if last { t_end } else { t + h };
                k1 = stages.k[6];
                y = stages.y_new;
                t = t_next;
                if observer(&seg) == Control::Stop || last {
                    return Ok((y, t, stats));
                }
                if last_rejected {
                    h_new = h_new.min(h);
                }
                last_rejected = false;
                h = h_new.min(self.h_max);
            } else {
                h_new = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
                stats.rejected += 1;
                last_rejected = true;
                h = h_new;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let solver = Dopri5::default();
        let f = |_t: f64, y: &[f64; 1]| [-y[0]];
        let (y, t, stats) = solver.integrate(&f, 0.0, [1.0], 5.0, |_| Control::Continue).unwrap();
        assert_eq!(t, 5.0);
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-11);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn dense_output_tracks_harmonic_oscillator() {
        let solver = Dopri5::default();
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut worst: f64 = 0.0;
        solver
            .integrate(&f, 0.0, [0.0, 1.0], 10.0, |seg| {
                for j in 0..=8 {
                    let t = seg.t0 + seg.h * j as f64 / 8.0;
                    let y = seg.eval(t);
                    worst = worst.max((y[0] - t.sin()).abs()).max((y[1] - t.cos()).abs());
                }
                Control::Continue
            })
            .unwrap();
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn observer_can_stop() {
        let solver = Dopri5::default();
        let f = |_t: f64, _y: &[f64; 1]| [1.0];
        let (y, t, _) = solver
            .integrate(&f, 0.0, [0.0], 100.0, |seg| if seg.t1() > 1.0 { Control::Stop } else { Control::Continue })
            .unwrap();
        assert!(t > 1.0 && t < 100.0);
        assert!((y[0] - t).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(Tolerances::from_tol(0.0).is_err());
        assert!(Tolerances::from_tol(1e-2).is_err());
        assert!(Tolerances::from_tol(1e-6).is_ok());
    }

    #[test]
    fn blow_up_reports_underflow_or_budget() {
        let solver = Dopri5 { max_steps: 100_000, ..Dopri5::default() };
        let f = |_t: f64, y: &[f64; 1]| [y[0] * y[0]];
        let err = solver.integrate(&f, 0.0, [1.0], 2.0, |_| Control::Continue).unwrap_err();
        assert!(matches!(
            err,
            LvError::StepSizeUnderflow { .. } | LvError::StepBudgetExhausted { .. }
        ));
    }
}
