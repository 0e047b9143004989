use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use stencil_dse::codesign::{pareto, ParetoSet};
use stencil_dse::time::t_alg;
use stencil_dse::tuner::{tune, Objective};
use stencil_dse::{Strategy, TileConfig};
use stencil_dse_bench::{calibration, grid_2d, jacobi2d, maxwell_like, random_points};

fn time_model(c: &mut Criterion) {
    let (kernel, arch, calib) = (jacobi2d(), maxwell_like(), calibration());
    let hex = TileConfig::hex(32, 8, 128, 2);
    let rect = TileConfig::rect(32, 8, 128, 2);
    c.bench_function("t_alg/hex", |b| {
        b.iter(|| t_alg(black_box(&kernel), &arch, &calib, black_box(&hex)).unwrap())
    });
    c.bench_function("t_alg/rect", |b| {
        b.iter(|| t_alg(black_box(&kernel), &arch, &calib, black_box(&rect)).unwrap())
    });
}

fn tuning(c: &mut Criterion) {
    let (kernel, arch, calib) = (jacobi2d(), maxwell_like(), calibration());
    let grid = grid_2d(Strategy::HexHybrid);
    c.bench_function("tune/hex_320", |b| {
        b.iter(|| tune(&kernel, &arch, &calib, black_box(&grid), Objective::Edp).unwrap())
    });
}

fn frontier(c: &mut Criterion) {
    let points = random_points(1000, 7);
    c.bench_function("pareto/sweep_1000", |b| {
        b.iter(|| pareto(black_box(&points)))
    });
    c.bench_function("pareto/incremental_1000", |b| {
        b.iter_batched(
            || points.clone(),
            |pts| {
                let mut set = ParetoSet::default();
                for p in pts {
                    set.insert(p);
                }
                set
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, time_model, tuning, frontier);
criterion_main!(benches);
