//! Exact simulation of the predator-prey birth-death process by Gillespie's
//! direct method.
//!
//! Channels for populations `(m, n)` in a region of size `omega`:
//!
//! | event          | rate               |
//! |----------------|--------------------|
//! | prey birth     | `m`                |
//! | prey death     | `m n / omega`      |
//! | predator birth | `alpha n m / omega`|
//! | predator death | `alpha n`          |

use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LvError, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::ModelParams;

use super::rng::{path_rng, PathRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub m: u64,
    pub n: u64,
    pub omega: f64,
}

impl DiscreteState {
    pub fn new(m: u64, n: u64, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid(format!("system size must be positive, got {omega}")));
        }
        Ok(Self { m, n, omega })
    }

    /// Nearest integer populations for densities `(x, y)`.
    pub fn from_densities(x: f64, y: f64, omega: f64) -> Result<Self> {
        Self::new((x * omega).round() as u64, (y * omega).round() as u64, omega)
    }

    pub fn densities(&self) -> (f64, f64) {
        (self.m as f64 / self.omega, self.n as f64 / self.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsaRates {
    pub prey_birth: f64,
    pub prey_death: f64,
    pub predator_birth: f64,
    pub predator_death: f64,
}

impl SsaRates {
    pub fn total(&self) -> f64 {
        self.prey_birth + self.prey_death + self.predator_birth + self.predator_death
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.prey_birth, self.prey_death, self.predator_birth, self.predator_death]
    }
}

pub fn ssa_rates(state: DiscreteState, params: ModelParams) -> SsaRates {
    let (m, n) = (state.m as f64, state.n as f64);
    let a = params.alpha();
    SsaRates {
        prey_birth: m,
        prey_death: m * n / state.omega,
        predator_birth: a * n * m / state.omega,
        predator_death: a * n,
    }
}

/// Inflow minus outflow of the stationary master equation evaluated at the
/// candidate invariant measure `p(m, n) = 1 / (m n)`.
pub fn master_stationarity_residual(state: DiscreteState, params: ModelParams) -> Result<f64> {
    let DiscreteState { m, n, omega } = state;
    if m < 2 || n < 2 {
        return Err(LvError::BoundaryState { m, n });
    }
    let a = params.alpha();
    let (m, n) = (m as f64, n as f64);
    let p = |i: f64, j: f64| 1.0 / (i * j);
    let inflow = p(m - 1.0, n) * (m - 1.0)
        + p(m + 1.0, n) * (m + 1.0) * n / omega
        + p(m, n - 1.0) * a * (n - 1.0) * m / omega
        + p(m, n + 1.0) * a * (n + 1.0);
    let outflow = p(m, n) * (m + m * n / omega + a * n * m / omega + a * n);
    Ok(inflow - outflow)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TimeLimit,
    /// Both populations extinct; every rate is zero.
    Absorbed,
    EventCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    pub m: u64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpPath {
    pub events: Vec<JumpEvent>,
    pub seed: u64,
    pub params: ModelParams,
    pub omega: f64,
    pub termination: Termination,
}

impl JumpPath {
    pub fn final_state(&self) -> DiscreteState {
        let e = self.events.last().expect("path holds its initial state");
        DiscreteState { m: e.m, n: e.n, omega: self.omega }
    }

    /// True when either species has died out by the end of the path.
    pub fn extinct(&self) -> bool {
        let s = self.final_state();
        s.m == 0 || s.n == 0
    }
}

/// Advances one event. Returns `None` when all rates vanish.
fn step(state: &mut DiscreteState, params: ModelParams, rng: &mut PathRng) -> Option<f64> {
    let rates = ssa_rates(*state, params).as_array();
    let total: f64 = rates.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let u1: f64 = rng.sample(Open01);
    let u2: f64 = rng.sample(Open01);
    let wait = -u1.ln() / total;
    let target = u2 * total;
    let mut acc = 0.0;
    let mut channel = 3;
    for (i, r) in rates.iter().enumerate() {
        acc += r;
        if target < acc {
            channel = i;
            break;
        }
    }
    // guard against rounding picking a zero-rate channel
    while rates[channel] == 0.0 {
        channel -= 1;
    }
    match channel {
        0 => state.m += 1,
        1 => state.m -= 1,
        2 => state.n += 1,
        _ => state.n -= 1,
    }
    Some(wait)
}

/// Records every event up to `t_max` or `max_events`.
pub fn ssa_simulate_with(
    start: DiscreteState,
    params: ModelParams,
    t_max: f64,
    max_events: usize,
    seed: u64,
    rng: &mut PathRng,
) -> Result<JumpPath> {
    if !(t_max > 0.0) {
        return Err(invalid(format!("t_max must be positive, got {t_max}")));
    }
    let mut state = start;
    let mut t = 0.0;
    let mut events = vec![JumpEvent { t, m: state.m, n: state.n }];
    let termination = loop {
        if events.len() > max_events {
            break Termination::EventCap;
        }
        let mut next = state;
        match step(&mut next, params, rng) {
            None => break Termination::Absorbed,
            Some(wait) => {
                if t + wait > t_max {
                    break Termination::TimeLimit;
                }
                t += wait;
                state = next;
                events.push(JumpEvent { t, m: state.m, n: state.n });
            }
        }
    };
    Ok(JumpPath { events, seed, params, omega: start.omega, termination })
}

/// Default cap on recorded events for a single path.
pub const DEFAULT_MAX_EVENTS: usize = 50_000_000;

/// Gillespie path from `start` on stream 0 of `seed`.
pub fn ssa_simulate(start: DiscreteState, params: ModelParams, t_max: f64, seed: u64) -> Result<JumpPath> {
    let mut rng = path_rng(seed, 0);
    ssa_simulate_with(start, params, t_max, DEFAULT_MAX_EVENTS, seed, &mut rng)
}

/// States at the given increasing `times`, without recording the full path.
pub fn ssa_states_at(
    start: DiscreteState,
    params: ModelParams,
    times: &[f64],
    rng: &mut PathRng,
) -> Vec<DiscreteState> {
    let mut out = Vec::with_capacity(times.len());
    let mut state = start;
    let mut t = 0.0;
    let mut pending: Option<(f64, DiscreteState)> = None;
    for &target in times {
        loop {
            let (t_next, next) = match pending.take() {
                Some(p) => p,
                None => {
                    let mut next = state;
                    match step(&mut next, params, rng) {
                        Some(wait) => (t + wait, next),
                        None => (f64::INFINITY, state),
                    }
                }
            };
            if t_next > target {
                pending = Some((t_next, next));
                break;
            }
            t = t_next;
            state = next;
        }
        out.push(state);
    }
    out
}

/// Ensemble of `n_paths` independent paths; path `i` uses stream `i`.
pub fn ssa_ensemble_at(
    start: DiscreteState,
    params: ModelParams,
    times: &[f64],
    seed: u64,
    n_paths: usize,
    exec: Execution,
) -> Vec<Vec<DiscreteState>> {
    map_indexed(exec, n_paths, |i| {
        let mut rng = path_rng(seed, i as u64);
        ssa_states_at(start, params, times, &mut rng)
    })
}
