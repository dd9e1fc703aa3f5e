use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use fracspde::contour::{ContourParams, ContourRule};
use fracspde::harness::{temporal_convergence, ExperimentConfig, Mode};
use fracspde::noise::{HurstPair, NoiseModel};
use fracspde::scheme::{ClassicalSolver, FastSolver, ModelParams, Solver, Variant};

fn model(n: usize, m: usize) -> ModelParams {
    ModelParams::new(0.7, 0.5, HurstPair::new(0.5, 0.5).unwrap(), 0.1, n, m).unwrap()
}

fn classical_vs_fast(c: &mut Criterion) {
    let rule = ContourRule::new(&ContourParams::default()).unwrap();
    let mut group = c.benchmark_group("solve_final");
    group.sample_size(10);
    for m in [256usize, 1024, 4096] {
        let p = model(32, m);
        let noise = NoiseModel::new(p.hurst, 32, m, 0.1, 1).unwrap().sample(0);
        let classical = ClassicalSolver::new(&p).unwrap();
        let fast = FastSolver::new(&p, &rule).unwrap();
        group.throughput(Throughput::Elements(m as u64));
        group.bench_with_input(BenchmarkId::new("classical", m), &noise, |b, x| {
            b.iter(|| classical.solve_final(black_box(x)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fast", m), &noise, |b, x| {
            b.iter(|| fast.solve_final(black_box(x)).unwrap())
        });
    }
    group.finish();
}

/// Monte Carlo paths on one thread against every core. Built without the
/// `parallel` feature both arms run sequentially.
fn paths_parallel_vs_sequential(c: &mut Criterion) {
    let base = ExperimentConfig {
        model: model(32, 64),
        contour: ContourParams::default(),
        samples: 32,
        resolutions: vec![8, 16, 32],
        mode: Mode::Temporal,
        master_seed: 3,
        solver: Variant::Fast,
        workers: 1,
    };
    let mut group = c.benchmark_group("temporal_convergence");
    group.sample_size(10);
    for (name, workers) in [("sequential", 1usize), ("parallel", 0)] {
        let cfg = ExperimentConfig {
            workers,
            ..base.clone()
        };
        group.bench_function(name, |b| {
            b.iter(|| temporal_convergence(black_box(&cfg)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, classical_vs_fast, paths_parallel_vs_sequential);
criterion_main!(benches);
