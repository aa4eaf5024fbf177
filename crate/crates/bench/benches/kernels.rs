use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use sdelab_bench::{driver, indicator_drift, uniform_times};
use sdelab_core::noise::fill_bridge;
use sdelab_core::solvers::{euler_maruyama, transformed_milstein};
use sdelab_core::transforms::{invert_transform, Transform};
use sdelab_core::{Purpose, SeedTree, TransformG};

fn solvers(c: &mut Criterion) {
    let model = indicator_drift();
    let g = TransformG::build(&model).unwrap();
    let mut group = c.benchmark_group("solve");
    for steps in [256usize, 4096] {
        let w = driver(1, steps);
        group.throughput(Throughput::Elements(steps as u64));
        group.bench_with_input(BenchmarkId::new("transformed-milstein", steps), &w, |b, w| {
            b.iter(|| transformed_milstein(&model, &g, 0.0, black_box(w)).unwrap().terminal())
        });
        group.bench_with_input(BenchmarkId::new("euler", steps), &w, |b, w| {
            b.iter(|| euler_maruyama(&model, 0.0, black_box(w)).unwrap().terminal())
        });
    }
    group.finish();
}

fn bridge(c: &mut Criterion) {
    let mut group = c.benchmark_group("bridge-fill");
    for steps in [64usize, 1024] {
        let times = uniform_times(steps, 1.0);
        let mut values = vec![0.0; times.len()];
        let mut rng = SeedTree::new(2).stream(Purpose::Fill, &[]);
        group.throughput(Throughput::Elements(steps as u64));
        group.bench_function(BenchmarkId::from_parameter(steps), |b| {
            b.iter(|| {
                fill_bridge(&mut rng, &times, &mut values);
                black_box(values[steps / 2])
            })
        });
    }
    group.finish();
}

fn inversion(c: &mut Criterion) {
    let g = TransformG::build(&indicator_drift()).unwrap();
    let ys: Vec<f64> = (0..1000).map(|k| g.value(-2.0 + 4.0 * k as f64 / 999.0)).collect();
    let mut group = c.benchmark_group("invert-g");
    group.throughput(Throughput::Elements(ys.len() as u64));
    group.bench_function("1000-points", |b| {
        b.iter(|| ys.iter().map(|&y| invert_transform(&g, black_box(y)).unwrap()).sum::<f64>())
    });
    group.finish();
}

criterion_group!(benches, solvers, bridge, inversion);
criterion_main!(benches);
