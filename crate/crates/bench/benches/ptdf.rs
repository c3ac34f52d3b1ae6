use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cycleflow::bench::{conventional_pipeline, dual_pipeline};
use cycleflow::ExecutionMode;
use cycleflow_bench::{label, sweep};

fn ptdf_by_cycle_count(c: &mut Criterion) {
    let grids = sweep(400, &[4, 20, 80, 200], 7);
    for (mode, name) in [
        (ExecutionMode::Dense, "dense"),
        (ExecutionMode::Sparse, "sparse"),
    ] {
        let mut group = c.benchmark_group(format!("ptdf_{name}"));
        group
            .sample_size(10)
            .measurement_time(Duration::from_secs(3));
        for grid in &grids {
            group.bench_with_input(
                BenchmarkId::new("conventional", label(grid)),
                grid,
                |b, g| b.iter(|| conventional_pipeline(g, mode).unwrap()),
            );
            group.bench_with_input(BenchmarkId::new("dual", label(grid)), grid, |b, g| {
                b.iter(|| dual_pipeline(g, mode).unwrap())
            });
        }
        group.finish();
    }
}

criterion_group!(benches, ptdf_by_cycle_count);
criterion_main!(benches);
