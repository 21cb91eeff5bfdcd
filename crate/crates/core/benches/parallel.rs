//! Parallel vs sequential execution on the three data-parallel workloads.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lvthermo::entropy::{relative_entropy_at_time, DensityField, Domain, Psi, Rho};
use lvthermo::eos::{default_offsets, eos_grid, DEFAULT_ALPHAS};
use lvthermo::exec::Execution;
use lvthermo::model::{hamiltonian, ModelParams, PhaseState};
use lvthermo::orbit::DEFAULT_TOL;
use lvthermo::stochastic::{sde_ensemble, ssa_ensemble_at, DiscreteState, SdeConfig};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn eos(c: &mut Criterion) {
    let offsets = default_offsets(8);
    let mut g = c.benchmark_group("eos_grid_5x8");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| eos_grid(black_box(&DEFAULT_ALPHAS), &offsets, DEFAULT_TOL, exec))
        });
    }
    g.finish();
}

fn ensembles(c: &mut Criterion) {
    let p = ModelParams::new(1.0).unwrap();
    let start = DiscreteState::from_densities(1.5, 1.0, 200.0).unwrap();
    let mut g = c.benchmark_group("ssa_ensemble_64");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ssa_ensemble_at(start, p, &[1.0, 3.0], black_box(1), 64, exec))
        });
    }
    g.finish();

    let config = SdeConfig { epsilon: 0.01, dt: 1e-3, t_max: 2.0, record_every: 100 };
    let x0 = PhaseState::new(1.5, 1.0).unwrap();
    let mut g = c.benchmark_group("sde_ensemble_64");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sde_ensemble(x0, p, config, black_box(1), 64, exec))
        });
    }
    g.finish();
}

fn pullbacks(c: &mut Criterion) {
    let p = ModelParams::new(1.0).unwrap();
    let h = 2.61;
    let mut field = DensityField::new(
        move |s| (h - hamiltonian(s, p)).max(0.0).powi(4) * s.x(),
        Rho::unit(),
        Domain::sublevel_set(h, p).unwrap(),
    );
    field.quadrature_n = 32;
    let mut g = c.benchmark_group("entropy_pullback_32x32");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| relative_entropy_at_time(&field, p, black_box(1.5), &Psi::ZLnZ, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, eos, ensembles, pullbacks);
criterion_main!(benches);
