use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iapg::experiments::bench::{run_bench, run_bench_sequential, tolerance_grid, BenchConfig};

fn trial_sweep(c: &mut Criterion) {
    let grid = tolerance_grid(64);
    let mut group = c.benchmark_group("inner_bench_trials");
    group.sample_size(10);
    for trials in [4usize, 16] {
        let cfg = BenchConfig { trials, seed: 7, ..Default::default() };
        group.bench_with_input(BenchmarkId::new("parallel", trials), &cfg, |b, cfg| {
            b.iter(|| run_bench(cfg, &grid).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", trials), &cfg, |b, cfg| {
            b.iter(|| run_bench_sequential(cfg, &grid).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, trial_sweep);
criterion_main!(benches);
