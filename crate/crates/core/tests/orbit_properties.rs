use lvthermo::eos::{d_area_d_h, eos_grid, DEFAULT_ALPHAS};
use lvthermo::exec::Execution;
use lvthermo::model::{hamiltonian, ModelParams, PhaseState};
use lvthermo::orbit::{energy_drift_bound, integrate, orbit_from_energy, DEFAULT_TOL};
use lvthermo::stats::{area_invariant_direct, summarize};
use proptest::prelude::*;

fn params(a: f64) -> ModelParams {
    ModelParams::new(a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energy_is_bounded_below(a in 0.05f64..10.0, x in 1e-3f64..50.0, y in 1e-3f64..50.0) {
        let p = params(a);
        prop_assert!(hamiltonian(PhaseState::new(x, y).unwrap(), p) >= p.h_min() - 1e-12);
    }

    #[test]
    fn orbits_close_and_conserve(a in 0.2f64..5.0, dh in 1e-3f64..3.0) {
        let p = params(a);
        let h = p.h_min() + dh;
        let orbit = orbit_from_energy(h, p, DEFAULT_TOL).unwrap();
        prop_assert!(orbit.closure_error() < 1e-6);
        prop_assert!(orbit.dense.max_energy_drift(p) < 1e-8);
        prop_assert!((hamiltonian(orbit.seed, p) - h).abs() < 1e-10);
        prop_assert!((orbit.seed.y() - 1.0).abs() < 1e-12 && orbit.seed.x() > 1.0);
    }

    #[test]
    fn mean_populations_are_one(a in 0.2f64..5.0, dh in 1e-3f64..3.0) {
        let p = params(a);
        let s = summarize(&orbit_from_energy(p.h_min() + dh, p, DEFAULT_TOL).unwrap()).unwrap();
        prop_assert!((s.mean_x - 1.0).abs() < 1e-6 && (s.mean_y - 1.0).abs() < 1e-6);
        prop_assert!((s.area_invariant / s.area_invariant_check - 1.0).abs() < 1e-7);
        prop_assert!((s.theta_x / s.theta_y - 1.0).abs() < 1e-7);
        prop_assert!((s.var_y / s.var_x / a - 1.0).abs() < 1e-6);
    }

    #[test]
    fn trajectories_are_increasing_in_time(a in 0.2f64..5.0, x in 0.2f64..4.0, y in 0.2f64..4.0) {
        let p = params(a);
        let start = PhaseState::new(x, y).unwrap();
        let traj = integrate(start, p, 5.0, 1e-8).unwrap();
        prop_assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
        prop_assert_eq!(traj.last().t, 5.0);
        let drift = traj.max_energy_drift(p);
        prop_assert!(drift < energy_drift_bound(1e-8, 5.0), "drift {}", drift);
    }
}

#[test]
fn area_slope_matches_period_across_alpha() {
    for a in [0.5, 1.0, 2.0, 4.0] {
        let p = params(a);
        let h = a + 1.5;
        let tau = orbit_from_energy(h, p, DEFAULT_TOL).unwrap().period_tau;
        let slope = d_area_d_h(h, p, 1e-4).unwrap();
        assert!((slope / tau - 1.0).abs() < 1e-6, "alpha {a}: {slope} vs {tau}");
    }
}

#[test]
fn line_integral_area_matches_indicator_grid() {
    let p = params(0.8);
    let s = summarize(&orbit_from_energy(2.5, p, DEFAULT_TOL).unwrap()).unwrap();
    let direct = area_invariant_direct(2.5, p, 2048).unwrap();
    assert!((direct / s.area_invariant - 1.0).abs() < 5e-4);
}

#[test]
fn eos_grid_is_identical_across_execution_modes() {
    let offsets = [0.05, 0.5, 1.5];
    let par = eos_grid(&DEFAULT_ALPHAS, &offsets, DEFAULT_TOL, Execution::Parallel);
    let seq = eos_grid(&DEFAULT_ALPHAS, &offsets, DEFAULT_TOL, Execution::Sequential);
    assert_eq!(par, seq);
    assert_eq!(par.len(), 15);
}

#[test]
fn fig1_levels_are_nested() {
    let p = params(1.0);
    let areas: Vec<f64> = [2.01, 2.19, 2.61, 3.40]
        .iter()
        .map(|&h| summarize(&orbit_from_energy(h, p, DEFAULT_TOL).unwrap()).unwrap().area_lebesgue)
        .collect();
    assert!(areas.windows(2).all(|w| w[1] > w[0]), "{areas:?}");
}
