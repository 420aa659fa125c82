use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cusumkit::baseline::solve_separately;
use cusumkit::cusum::DEFAULT_TAIL_TOL;
use cusumkit::{
    arl_direct, arl_via_sprt, run_length_moments, run_length_survival, solve_characteristics, CusumConfig,
    ObservationModel, SprtConfig,
};

fn model() -> ObservationModel {
    ObservationModel::gaussian_shift(1.0).unwrap()
}

fn sprt_solvers(c: &mut Criterion) {
    let config = SprtConfig::new(-2.0, 2.0, model()).unwrap();
    let mut group = c.benchmark_group("sprt_four_characteristics");
    group.sample_size(10);
    for n in [128usize, 256, 512] {
        let grid = config.grid(n).unwrap();
        group.bench_with_input(BenchmarkId::new("grouped", n), &grid, |b, grid| {
            b.iter(|| solve_characteristics(black_box(&config), grid).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("separate", n), &grid, |b, grid| {
            b.iter(|| solve_separately(black_box(&config), grid).unwrap())
        });
    }
    group.finish();
}

fn cusum_ops(c: &mut Criterion) {
    let config = CusumConfig::new(4.0, 0.0, model()).unwrap();
    let grid = config.grid(256).unwrap();
    let mut group = c.benchmark_group("cusum_n256");
    group.sample_size(10);
    group.bench_function("arl_via_sprt", |b| {
        b.iter(|| arl_via_sprt(black_box(&config), &grid).unwrap())
    });
    group.bench_function("arl_direct", |b| {
        b.iter(|| arl_direct(black_box(&config), &grid).unwrap())
    });
    group.bench_function("survival_1000", |b| {
        b.iter(|| run_length_survival(black_box(&config), &grid, 1000).unwrap())
    });
    group.bench_function("moments_k2", |b| {
        b.iter(|| run_length_moments(black_box(&config), &grid, 2, DEFAULT_TAIL_TOL).unwrap())
    });
    group.finish();
}

criterion_group!(benches, sprt_solvers, cusum_ops);
criterion_main!(benches);
