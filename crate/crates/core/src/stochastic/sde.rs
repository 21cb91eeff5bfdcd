//! Euler–Maruyama for the diffusion limit
//!
//! ```text
//! dX = X(1 - Y) dt + sqrt(eps X (1 + Y)) dW1
//! dY = alpha Y (X - 1) dt + sqrt(eps alpha Y (X + 1)) dW2
//! ```
//!
//! A step that would leave the open quadrant is redrawn; after
//! [`MAX_REDRAWS`] failures the step is split in two halves, recursively.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LvError, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::{ModelParams, PhaseState};
use crate::orbit::TimedState;

use super::rng::{path_rng, PathRng};

pub const MAX_REDRAWS: usize = 100;
/// Deepest local step halving before giving up.
pub const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub t_max: f64,
    /// Keep every k-th grid point (the final time is always kept).
    pub record_every: usize,
}

impl SdeConfig {
    pub fn new(epsilon: f64, dt: f64, t_max: f64) -> Self {
        Self { epsilon, dt, t_max, record_every: 1 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(invalid(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every must be at least 1"));
        }
        Ok(())
    }

    /// Number of grid steps; the last one is shortened to land on `t_max`.
    pub fn n_steps(&self) -> usize {
        let n = (self.t_max / self.dt).ceil();
        // drop a step created only by rounding of t_max / dt
        if (n - 1.0) * self.dt >= self.t_max * (1.0 - 1e-12) {
            (n as usize).saturating_sub(1).max(1)
        } else {
            n as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdePath {
    pub samples: Vec<TimedState>,
    pub epsilon: f64,
    pub dt: f64,
    pub seed: u64,
}

impl SdePath {
    pub fn last(&self) -> &TimedState {
        self.samples.last().expect("path holds its initial state")
    }
}

struct Stepper<'a> {
    alpha: f64,
    epsilon: f64,
    rng: &'a mut PathRng,
}

impl Stepper<'_> {
    fn advance(&mut self, x: f64, y: f64, h: f64, t: f64, depth: u32) -> Result<(f64, f64)> {
        let a = self.alpha;
        let (fx, fy) = (x * (1.0 - y), a * y * (x - 1.0));
        let sx = (self.epsilon * x * (1.0 + y) * h).sqrt();
        let sy = (self.epsilon * a * y * (x + 1.0) * h).sqrt();
        for _ in 0..MAX_REDRAWS {
            let z1: f64 = self.rng.sample(StandardNormal);
            let z2: f64 = self.rng.sample(StandardNormal);
            let (nx, ny) = (x + fx * h + sx * z1, y + fy * h + sy * z2);
            if nx > 0.0 && ny > 0.0 {
                return Ok((nx, ny));
            }
        }
        if depth >= MAX_HALVINGS {
            return Err(LvError::StepRejectionLimit { t });
        }
        let half = 0.5 * h;
        let (mx, my) = self.advance(x, y, half, t, depth + 1)?;
        self.advance(mx, my, half, t + half, depth + 1)
    }
}

/// Simulates one path drawing from `rng`.
pub fn sde_simulate_with(
    start: PhaseState,
    params: ModelParams,
    config: SdeConfig,
    seed: u64,
    rng: &mut PathRng,
) -> Result<SdePath> {
    config.validate()?;
    let n = config.n_steps();
    let mut stepper = Stepper { alpha: params.alpha(), epsilon: config.epsilon, rng };
    let (mut x, mut y) = (start.x(), start.y());
    let mut samples = Vec::with_capacity(n / config.record_every + 2);
    samples.push(TimedState { t: 0.0, state: start });
    let mut t = 0.0;
    for k in 1..=n {
        let t_next = if k == n { config.t_max } else { k as f64 * config.dt };
        (x, y) = stepper.advance(x, y, t_next - t, t, 0)?;
        t = t_next;
        if k % config.record_every == 0 || k == n {
            samples.push(TimedState { t, state: PhaseState::new(x, y)? });
        }
    }
    Ok(SdePath { samples, epsilon: config.epsilon, dt: config.dt, seed })
}

/// One path on stream 0 of `seed`.
pub fn sde_simulate(start: PhaseState, params: ModelParams, config: SdeConfig, seed: u64) -> Result<SdePath> {
    let mut rng = path_rng(seed, 0);
    sde_simulate_with(start, params, config, seed, &mut rng)
}

/// `n_paths` independent paths; path `i` uses stream `i` of `seed`.
pub fn sde_ensemble(
    start: PhaseState,
    params: ModelParams,
    config: SdeConfig,
    seed: u64,
    n_paths: usize,
    exec: Execution,
) -> Vec<Result<SdePath>> {
    map_indexed(exec, n_paths, |i| {
        let mut rng = path_rng(seed, i as u64);
        sde_simulate_with(start, params, config, seed, &mut rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hamiltonian;

    fn p(a: f64) -> ModelParams {
        ModelParams::new(a).unwrap()
    }

    #[test]
    fn deterministic_limit_at_fixed_point() {
        let path = sde_simulate(PhaseState::FIXED_POINT, p(1.0), SdeConfig::new(0.0, 1e-2, 1.0), 1).unwrap();
        assert_eq!(path.samples.len(), 101);
        assert!(path.samples.iter().all(|s| s.state == PhaseState::FIXED_POINT));
        assert_eq!(path.last().t, 1.0);
    }

    #[test]
    fn grid_lands_on_t_max() {
        let c = SdeConfig::new(0.0, 0.3, 1.0);
        assert_eq!(c.n_steps(), 4);
        assert_eq!(SdeConfig::new(0.0, 0.1, 1.0).n_steps(), 10);
        let path = sde_simulate(PhaseState::new(1.2, 1.0).unwrap(), p(1.0), c, 0).unwrap();
        let ts: Vec<f64> = path.samples.iter().map(|s| s.t).collect();
        assert_eq!(ts.len(), 5);
        assert_eq!(*ts.last().unwrap(), 1.0);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn record_every_thins_samples() {
        let mut c = SdeConfig::new(0.01, 1e-3, 1.0);
        c.record_every = 100;
        let path = sde_simulate(PhaseState::new(1.2, 1.0).unwrap(), p(1.0), c, 3).unwrap();
        assert_eq!(path.samples.len(), 11);
    }

    #[test]
    fn invalid_configs() {
        let s = PhaseState::FIXED_POINT;
        assert!(sde_simulate(s, p(1.0), SdeConfig::new(-1.0, 1e-3, 1.0), 0).is_err());
        assert!(sde_simulate(s, p(1.0), SdeConfig::new(0.1, 0.0, 1.0), 0).is_err());
        assert!(sde_simulate(s, p(1.0), SdeConfig::new(0.1, 1e-3, -1.0), 0).is_err());
    }

    #[test]
    fn noiseless_euler_is_first_order() {
        let start = PhaseState::new(1.2, 1.0).unwrap();
        let h0 = hamiltonian(start, p(1.0));
        let drift = |dt: f64| {
            let path = sde_simulate(start, p(1.0), SdeConfig::new(0.0, dt, 2.0), 0).unwrap();
            (hamiltonian(path.last().state, p(1.0)) - h0).abs()
        };
        let ratio = drift(1e-3) / drift(5e-4);
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn paths_stay_positive_under_heavy_noise() {
        let c = SdeConfig::new(0.5, 1e-2, 5.0);
        for seed in 0..20 {
            if let Ok(path) = sde_simulate(PhaseState::new(0.2, 0.2).unwrap(), p(1.0), c, seed) {
                assert!(path.samples.iter().all(|s| s.state.x() > 0.0 && s.state.y() > 0.0));
            }
        }
    }

    #[test]
    fn ensemble_reproducible_across_modes() {
        let c = SdeConfig::new(0.05, 1e-2, 1.0);
        let start = PhaseState::new(1.2, 1.0).unwrap();
        let a = sde_ensemble(start, p(1.0), c, 7, 16, Execution::Parallel);
        let b = sde_ensemble(start, p(1.0), c, 7, 16, Execution::Sequential);
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }
}
