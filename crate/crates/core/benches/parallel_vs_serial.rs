use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plml_core::discrete::{run_msgd, run_msgd_serial, DiscreteParams, InitialLaw, StepSchedule};
use plml_core::landscape::make_quadratic;
use plml_core::sweep::{discrete_cells, figure_config, Execution, Figure};

fn ensemble(c: &mut Criterion) {
    let spec = make_quadratic(&[0.5, 1.0, 2.0, 4.0]).unwrap().with_sigma(1.0).unwrap();
    let mut group = c.benchmark_group("msgd_ensemble");
    group.sample_size(10);
    for n_paths in [256, 2048] {
        let params = DiscreteParams {
            schedule: StepSchedule::Constant(0.01),
            mu: 1.5,
            n_steps: 1000,
            n_paths,
            seed: 1,
            init: InitialLaw::at(vec![1.0; 4]),
        };
        group.bench_with_input(BenchmarkId::new("parallel", n_paths), &params, |b, p| {
            b.iter(|| run_msgd(&spec, black_box(p), None).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("serial", n_paths), &params, |b, p| {
            b.iter(|| run_msgd_serial(&spec, black_box(p), None).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let cfg = figure_config(Figure::One, 6);
    let mut group = c.benchmark_group("discrete_sweep_6x6");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| discrete_cells(black_box(&cfg), Execution::Parallel).unwrap()));
    group.bench_function("serial", |b| b.iter(|| discrete_cells(black_box(&cfg), Execution::Serial).unwrap()));
    group.finish();
}

criterion_group!(benches, ensemble, sweep);
criterion_main!(benches);
