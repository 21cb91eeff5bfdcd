//! The invariant suite behind the `check` command and the acceptance tests.
//! Each check returns a pass/fail outcome with a short numeric summary.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::entropy::{log_bump, relative_entropy_at_time, stationary_divergence, DensityField, Domain, Psi, Rho};
use crate::eos::{d_area_d_h, helmholtz_residual, DEFAULT_ALPHAS};
use crate::error::Result;
use crate::exec::{map_indexed, map_slice, Execution};
use crate::hdiff::{averaged_coefficients, default_h_grid, default_h_ref, h_path_extract, pss_curve};
use crate::io::{jump_table, sde_table, Preamble};
use crate::model::{hamiltonian, ModelParams, PhaseState};
use crate::orbit::{integrate, log_extent, orbit_from_energy, DEFAULT_TOL};
use crate::stats::{summarize, summary_at, OrbitSummary};
use crate::stochastic::{
    fixed_point_eigenvalues, jacobian_eigenvalues_at, locate_fixed_point, master_stationarity_residual, path_rng, predicted_eigenvalues, sde_ensemble,
    ssa_simulate, ssa_states_at, DiscreteState, SdeConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const CHECKS: [(u32, &str); 13] = [
    (1, "mean populations equal one"),
    (2, "variance identities"),
    (3, "energy conservation over one period"),
    (4, "area slope equals period; theta routes agree"),
    (5, "Helmholtz relation converges at second order"),
    (6, "small-oscillation limits"),
    (7, "equation-of-state monotonicity"),
    (8, "discrete invariant measure 1/(mn)"),
    (9, "law of large numbers scaling"),
    (10, "decomposition fixed-point eigenvalues"),
    (11, "averaged energy diffusion"),
    (12, "relative entropy conservation"),
    (13, "seeded reproducibility"),
];

/// Checks that fail as stated: the variance identities (2) do not hold for
/// `alpha != 1`, and the eigenvalue real part (10) carries a second-order term
/// beyond the tolerance at `alpha = 4`.
pub const KNOWN_FAILURES: [u32; 2] = [2, 10];

/// `(alpha, h)` pairs shared by the per-orbit identity checks.
pub fn identity_grid() -> Vec<(f64, f64)> {
    let mut g = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        for d in [0.1, 1.0, 2.0] {
            g.push((a, a + 1.0 + d));
        }
    }
    g
}

fn params(alpha: f64) -> ModelParams {
    ModelParams::new(alpha).expect("positive alpha")
}

fn grid_summaries(exec: Execution) -> Result<Vec<OrbitSummary>> {
    map_slice(exec, &identity_grid(), |&(a, h)| summary_at(h, params(a), DEFAULT_TOL))
        .into_iter()
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn check_mean_populations(exec: Execution) -> Result<(bool, String)> {
    let worst = grid_summaries(exec)?
        .iter()
        .map(|s| (s.mean_x - 1.0).abs().max((s.mean_y - 1.0).abs()))
        .fold(0.0, f64::max);
    Ok((worst < 1e-6, format!("max |<x>-1|, |<y>-1| = {worst:.2e} (tol 1e-6)")))
}

fn check_variance_identities(exec: Execution) -> Result<(bool, String)> {
    let sums = grid_summaries(exec)?;
    let mut worst = [0.0f64; 3];
    let mut bad_alphas = Vec::new();
    for s in &sums {
        let a = s.alpha;
        let errs = [
            rel(s.var_x * a * s.tau, s.area_lebesgue),
            rel(s.var_y * s.tau, a * s.area_lebesgue),
            rel(s.var_y / s.var_x, a * a),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
        if errs.iter().any(|&e| e >= 1e-6) && !bad_alphas.contains(&a) {
            bad_alphas.push(a);
        }
    }
    let mut detail = format!(
        "rel err: <(x-1)^2> alpha tau = A_leb {:.2e}; <(y-1)^2> tau = alpha A_leb {:.2e}; var_y/var_x = alpha^2 {:.2e}",
        worst[0], worst[1], worst[2]
    );
    if !bad_alphas.is_empty() {
        // the identities that do hold, for the record
        let held = sums
            .iter()
            .map(|s| rel(s.var_y * s.tau, s.area_lebesgue).max(rel(s.var_y / s.var_x, s.alpha)))
            .fold(0.0, f64::max);
        let _ = write!(
            detail,
            "; fails at alpha {bad_alphas:?}; <(y-1)^2> tau = A_leb and var_y/var_x = alpha hold to {held:.2e}"
        );
    }
    Ok((worst.iter().all(|&w| w < 1e-6), detail))
}

fn check_energy_conservation(exec: Execution) -> Result<(bool, String)> {
    let drifts: Vec<f64> = map_slice(exec, &identity_grid(), |&(a, h)| -> Result<f64> {
        let p = params(a);
        let orbit = orbit_from_energy(h, p, DEFAULT_TOL)?;
        Ok(orbit.dense.samples.iter().map(|s| (hamiltonian(s.state, p) - h).abs()).fold(0.0, f64::max))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let worst = drifts.iter().cloned().fold(0.0, f64::max);
    Ok((worst < 1e-8, format!("max |H(t) - h| = {worst:.2e} at tol 1e-10 (bound 1e-8)")))
}

fn check_area_slope(exec: Execution) -> Result<(bool, String)> {
    let rows: Vec<[f64; 3]> = map_slice(exec, &identity_grid(), |&(a, h)| -> Result<[f64; 3]> {
        let p = params(a);
        let s = summary_at(h, p, DEFAULT_TOL)?;
        let slope = d_area_d_h(h, p, 1e-4)?;
        Ok([rel(slope, s.tau), rel(s.area_invariant / slope, s.theta_y), rel(s.theta_x, s.theta_y)])
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut worst = [0.0f64; 3];
    for r in &rows {
        for k in 0..3 {
            worst[k] = worst[k].max(r[k]);
        }
    }
    Ok((
        worst.iter().all(|&w| w < 1e-4),
        format!(
            "rel err: dA/dh vs tau {:.2e}; A/(dA/dh) vs theta {:.2e}; theta_x vs theta_y {:.2e} (tol 1e-4)",
            worst[0], worst[1], worst[2]
        ),
    ))
}

fn check_helmholtz() -> Result<(bool, String)> {
    let p = params(1.0);
    let mut ok = true;
    let mut detail = String::from("residual ratio under halving at (2.61, 1):");
    for (dh, da) in [(1e-3, 0.0), (0.0, 1e-3), (1e-3, 1e-3)] {
        let r1 = helmholtz_residual(2.61, p, dh, da)?;
        let r2 = helmholtz_residual(2.61, p, 0.5 * dh, 0.5 * da)?;
        let ratio = r1.residual / r2.residual;
        ok &= (ratio - 4.0).abs() <= 1.0;
        let _ = write!(detail, " (dh {dh:e}, dalpha {da:e}) {ratio:.3}");
    }
    Ok((ok, detail))
}

fn check_small_oscillations() -> Result<(bool, String)> {
    let mut worst = [0.0f64; 3];
    for a in [0.5, 1.0, 2.0] {
        let p = params(a);
        let h = a + 1.0 + 1e-4;
        let s = summary_at(h, p, DEFAULT_TOL)?;
        worst[0] = worst[0].max(rel(s.tau, 2.0 * PI / a.sqrt()));
        worst[1] = worst[1].max(rel(s.theta_y, h - p.h_min()));
        worst[2] = worst[2].max(rel(s.f_alpha, -1.0));
    }
    Ok((
        worst[0] < 1e-3 && worst[1] < 1e-2 && worst[2] < 1e-2,
        format!(
            "at h = alpha+1+1e-4: tau vs 2pi/sqrt(alpha) {:.2e} (tol 1e-3); theta vs h-h_min {:.2e} (tol 1e-2); F_alpha vs -1 {:.2e} (tol 1e-2)",
            worst[0], worst[1], worst[2]
        ),
    ))
}

fn strictly(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn check_monotonicity(exec: Execution) -> Result<(bool, String)> {
    let alphas = DEFAULT_ALPHAS;
    let fixed_h = [2.61, 3.0, 3.4];
    let offsets = [0.1, 0.5, 1.0, 2.0];
    let mut pairs = Vec::new();
    for &h in &fixed_h {
        pairs.extend(alphas.iter().map(|&a| (a, h)));
    }
    for &a in &alphas {
        pairs.extend(offsets.iter().map(|&o| (a, a + 1.0 + o)));
    }
    let sums: Vec<OrbitSummary> = map_slice(exec, &pairs, |&(a, h)| summary_at(h, params(a), DEFAULT_TOL))
        .into_iter()
        .collect::<Result<_>>()?;
    let (by_alpha, by_h) = sums.split_at(fixed_h.len() * alphas.len());
    let mut ok_alpha = true;
    for row in by_alpha.chunks(alphas.len()) {
        let th: Vec<f64> = row.iter().map(|s| s.theta()).collect();
        let f: Vec<f64> = row.iter().map(|s| s.f_alpha_abs()).collect();
        ok_alpha &= strictly(&th, false) && strictly(&f, false);
    }
    let mut ok_h = true;
    for row in by_h.chunks(offsets.len()) {
        let th: Vec<f64> = row.iter().map(|s| s.theta()).collect();
        let f: Vec<f64> = row.iter().map(|s| s.f_alpha_abs()).collect();
        ok_h &= strictly(&th, true) && strictly(&f, true);
    }
    let areas: Vec<f64> = [0.5, 0.6, 0.8, 1.2]
        .iter()
        .map(|&a| summary_at(2.61, params(a), DEFAULT_TOL).map(|s| s.area_invariant))
        .collect::<Result<_>>()?;
    let ok_area = strictly(&areas, false);
    Ok((
        ok_alpha && ok_h && ok_area,
        format!(
            "theta,|F| decrease in alpha at h {fixed_h:?}: {ok_alpha}; increase in h: {ok_h}; area at h=2.61 decreasing in alpha: {ok_area}"
        ),
    ))
}

fn check_discrete_measure() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for a in [0.5, 1.0, 2.0] {
        let p = params(a);
        for omega in [1.0, 10.0, 100.0] {
            for m in 2..=50 {
                for n in 2..=50 {
                    let r = master_stationarity_residual(DiscreteState::new(m, n, omega)?, p)?;
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    Ok((worst < 1e-14, format!("max |residual| = {worst:.2e} on (2..50)^2 (tol 1e-14)")))
}

/// RMS distance of the SSA densities at `t` from the ODE started at the
/// same (rounded) densities.
pub fn lln_rms(omega: f64, n_paths: usize, seed: u64, exec: Execution) -> Result<f64> {
    let p = params(1.0);
    let orbit = orbit_from_energy(2.61, p, DEFAULT_TOL)?;
    let t = 0.5 * orbit.period_tau;
    let start = DiscreteState::from_densities(orbit.seed.x(), orbit.seed.y(), omega)?;
    let (x0, y0) = start.densities();
    let reference = integrate(PhaseState::new(x0, y0)?, p, t, DEFAULT_TOL)?.last().state;
    let sq = map_indexed(exec, n_paths, |i| {
        let mut rng = path_rng(seed, i as u64);
        let end = ssa_states_at(start, p, &[t], &mut rng)[0];
        let (x, y) = end.densities();
        (x - reference.x()).powi(2) + (y - reference.y()).powi(2)
    });
    Ok((crate::exec::pairwise_sum(&sq) / n_paths as f64).sqrt())
}

fn check_lln(exec: Execution) -> Result<(bool, String)> {
    let small = lln_rms(1e3, 400, 2024, exec)?;
    let large = lln_rms(4e3, 400, 2025, exec)?;
    let ratio = small / large;
    Ok((
        (ratio - 2.0).abs() <= 0.4,
        format!("RMS at t = tau/2: Omega=1e3 {small:.4e}, Omega=4e3 {large:.4e}, ratio {ratio:.3} (expect 2 +- 20%)"),
    ))
}

fn check_eigenvalues() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for a in [1.0, 4.0] {
        let ev = fixed_point_eigenvalues(params(a), 0.1)?;
        let pred: [Complex64; 2] = predicted_eigenvalues(params(a), 0.1);
        let err = (ev[0] - pred[0]).norm().max((ev[1] - pred[1]).norm());
        worst = worst.max(err);
        let fp = locate_fixed_point(params(a), 0.1)?;
        let _ = write!(
            detail,
            "alpha {a}: {:.5}{:+.5}i at ({:.5}, {:.5}) vs {:.3}{:+.3}i; ",
            ev[0].re,
            ev[0].im,
            fp.x(),
            fp.y(),
            pred[0].re,
            pred[0].im
        );
        if err >= 1e-2 {
            let nominal = jacobian_eigenvalues_at(PhaseState::new(1.1, 0.9)?, params(a), 0.1);
            let _ = write!(detail, "(at (1+eps, 1-eps) itself: {:.5}{:+.5}i); ", nominal[0].re, nominal[0].im);
        }
    }
    let _ = write!(detail, "max |err| {worst:.2e} (tol 1e-2 at eps 0.1)");
    Ok((worst < 1e-2, detail))
}

/// Mean and standard error of `(H(tau) - H(0)) / tau` over an SDE ensemble
/// started on the orbit `H = h0`.
pub fn sde_energy_drift(
    params: ModelParams,
    h0: f64,
    epsilon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<(f64, f64)> {
    let orbit = orbit_from_energy(h0, params, DEFAULT_TOL)?;
    let tau = orbit.period_tau;
    let config = SdeConfig { epsilon, dt, t_max: tau, record_every: usize::MAX };
    let slopes: Vec<f64> = sde_ensemble(orbit.seed, params, config, seed, n_paths, exec)
        .into_iter()
        .map(|path| {
            let hs = h_path_extract(&path?, params);
            Ok((hs[hs.len() - 1].1 - hs[0].1) / tau)
        })
        .collect::<Result<_>>()?;
    let n = slopes.len() as f64;
    let mean = crate::exec::pairwise_sum(&slopes) / n;
    let dev: Vec<f64> = slopes.iter().map(|s| (s - mean).powi(2)).collect();
    let var = crate::exec::pairwise_sum(&dev) / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

fn check_h_diffusion(exec: Execution) -> Result<(bool, String)> {
    let p = params(1.0);
    let table = pss_curve(p, &default_h_grid(p), default_h_ref(p), exec)?;
    let top: Vec<f64> = table
        .rows()
        .filter(|r| r.0 - p.h_min() >= 1.0)
        .map(|r| r.3)
        .collect();
    let tail_up = top.len() > 1 && strictly(&top, true);
    let b_ok = table.b_values.iter().all(|&b| b > 0.0) && strictly(&table.b_values, true);
    let a_edge = table.a_values[0];
    let a_ref = table.a_values[table.h_grid.iter().position(|&h| h == table.h_ref).unwrap_or(0)];
    let a_ok = a_edge < 0.1 * a_ref && strictly(&table.a_values, true);

    let h0 = 2.61;
    let eps = 1e-3;
    let (b0, _) = averaged_coefficients(h0, p)?;
    let (mean, se) = sde_energy_drift(p, h0, eps, 1e-4, 2000, 7, exec)?;
    let z = (mean - eps * b0) / se;
    let drift_ok = z.abs() < 3.0;
    Ok((
        tail_up && b_ok && a_ok && drift_ok,
        format!(
            "alpha 1: pss increasing over top decade: {tail_up}; b positive increasing: {b_ok}; A(edge)/A(h_ref) = {:.3e}: {a_ok}; \
             H drift {mean:.4e} vs eps b(h0) {:.4e}, z = {z:.2}",
            a_edge / a_ref,
            eps * b0
        ),
    ))
}

fn check_entropy(exec: Execution) -> Result<(bool, String)> {
    let p = params(1.0);
    let h = 2.61;
    let orbit = orbit_from_energy(h, p, DEFAULT_TOL)?;
    let theta = summarize(&orbit)?.theta();
    let tau = orbit.period_tau;
    let domain = Domain::sublevel_set(h, p)?;
    let [_, p1, _, _] = log_extent(h, p)?;
    let center = PhaseState::from_log(0.35 * p1, 0.0);

    let local = log_bump(center, 0.5 * p1);
    let mut fields = Vec::new();
    for rho in [Rho::unit(), Rho::gibbs(theta)?] {
        let local = local.clone();
        let mut f = DensityField::new(move |s| 2.0 * local(s), rho.clone(), domain);
        f.quadrature_n = 128;
        fields.push(("bump", f));
        let broad = DensityField::new(
            move |s| {
                let e = h - hamiltonian(s, p);
                if e > 0.0 {
                    e.powi(4) * s.x()
                } else {
                    0.0
                }
            },
            rho,
            domain,
        );
        fields.push(("level", broad));
    }
    let times: Vec<f64> = (0..=4).map(|k| k as f64 * tau / 8.0).collect();
    let mut worst = 0.0f64;
    let mut leaks = 0;
    for (_, field) in &fields {
        let v0 = relative_entropy_at_time(field, p, 0.0, &Psi::ZLnZ, exec)?.value;
        for &t in &times[1..] {
            let v = relative_entropy_at_time(field, p, t, &Psi::ZLnZ, exec)?;
            leaks += v.leaked_nodes;
            worst = worst.max(((v.value - v0) / v0).abs());
        }
    }

    let mut div = 0.0f64;
    for rho in [Rho::unit(), Rho::gibbs(1.0)?, Rho::power(2)] {
        for i in 0..10 {
            for j in 0..10 {
                let s = PhaseState::new(0.2 + 4.8 * i as f64 / 9.0, 0.2 + 4.8 * j as f64 / 9.0)?;
                let a = [0.5, 1.0, 2.0][(i + j) % 3];
                div = div.max(stationary_divergence(s, params(a), &rho).abs());
            }
        }
    }
    Ok((
        worst < 1e-4 && div < 1e-10 && leaks == 0,
        format!(
            "z ln z entropy over [0, tau/2], rho in {{1, exp(-h/theta)}}: max rel change {worst:.2e} (tol 1e-4), leaked nodes {leaks}; \
             max |div| {div:.2e} (tol 1e-10)"
        ),
    ))
}

/// CSV bytes of a seeded SSA path and a seeded SDE ensemble.
pub fn seeded_outputs(seed: u64, exec: Execution) -> Result<Vec<u8>> {
    let p = params(1.0);
    let start = DiscreteState::new(100, 80, 100.0)?;
    let jump = ssa_simulate(start, p, 5.0, seed)?;
    let config = SdeConfig { epsilon: 0.01, dt: 1e-3, t_max: 2.0, record_every: 50 };
    let sde = sde_ensemble(PhaseState::new(1.2, 1.0)?, p, config, seed, 32, exec)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut out = jump_table(&[jump]).to_bytes(&Preamble::new("ssa", &serde_json::json!({ "seed": seed })));
    out.extend(sde_table(&sde, p).to_bytes(&Preamble::new("sde", &config)));
    Ok(out)
}

fn check_reproducibility(exec: Execution) -> Result<(bool, String)> {
    let a = seeded_outputs(99, exec)?;
    let b = seeded_outputs(99, exec)?;
    let c = seeded_outputs(99, Execution::Sequential)?;
    let d = seeded_outputs(100, exec)?;
    let same = a == b;
    let modes = a == c;
    let differs = a != d;
    Ok((
        same && modes && differs,
        format!("identical bytes on rerun: {same}; parallel vs sequential: {modes}; different seed differs: {differs} ({} bytes)", a.len()),
    ))
}

pub fn run_check(id: u32, exec: Execution) -> CheckOutcome {
    let title = CHECKS.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("unknown check");
    let result = match id {
        1 => check_mean_populations(exec),
        2 => check_variance_identities(exec),
        3 => check_energy_conservation(exec),
        4 => check_area_slope(exec),
        5 => check_helmholtz(),
        6 => check_small_oscillations(),
        7 => check_monotonicity(exec),
        8 => check_discrete_measure(),
        9 => check_lln(exec),
        10 => check_eigenvalues(),
        11 => check_h_diffusion(exec),
        12 => check_entropy(exec),
        13 => check_reproducibility(exec),
        _ => Ok((false, format!("no check numbered {id}"))),
    };
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("{}: {e}", e.name())));
    CheckOutcome { id, title, passed, detail }
}

pub fn run_all(exec: Execution) -> Vec<CheckOutcome> {
    CHECKS.iter().map(|&(id, _)| run_check(id, exec)).collect()
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{mark}] {:>2} {}: {}", self.id, self.title, self.detail)
    }
}
