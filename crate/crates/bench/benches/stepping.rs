use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use drainet_bench::{dual_start, environment, open_start, rescaled_pair};
use drainet_core::dual::dual_targets;
use drainet_core::lattice_paths::{step, targets};
use drainet_core::metrics::{hausdorff, path_metric};
use drainet_core::{Cell, DualVertex, Kind};
use std::hint::black_box;

const WALK: u64 = 10_000;

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward");
    g.throughput(Throughput::Elements(WALK));
    for p in [0.2, 0.5, 0.8] {
        let env = environment(p, 0.02);
        let z = open_start(&env);
        g.bench_function(format!("l-step p={p}"), |b| {
            b.iter(|| {
                let mut x = z.x;
                for t in 0..WALK as i64 {
                    x = step(&env, Cell::new(x, t), Kind::Left).unwrap();
                }
                black_box(x)
            })
        });
    }
    let env = environment(0.5, 0.02);
    let z = open_start(&env);
    g.bench_function("both-targets p=0.5", |b| {
        b.iter(|| {
            let mut x = z.x;
            for t in 0..WALK as i64 {
                x = targets(&env, Cell::new(x, t)).unwrap().0;
            }
            black_box(x)
        })
    });
    g.finish();
}

fn backward(c: &mut Criterion) {
    let mut g = c.benchmark_group("dual");
    g.throughput(Throughput::Elements(WALK));
    let env = environment(0.5, 0.02);
    let z = dual_start(&env);
    g.bench_function("l-step p=0.5", |b| {
        b.iter(|| {
            let mut x2 = z.x2;
            for k in 0..WALK as i64 {
                x2 = dual_targets(&env, DualVertex::new(x2, -k)).unwrap().0;
            }
            black_box(x2)
        })
    });
    g.finish();
}

fn metric(c: &mut Criterion) {
    let mut g = c.benchmark_group("metric");
    let env = environment(0.5, 0.05);
    for steps in [100usize, 10_000] {
        let (a, b) = rescaled_pair(&env, steps, 50);
        g.bench_function(format!("path-metric {steps} knots"), |bch| {
            bch.iter(|| black_box(path_metric(&a, &b)))
        });
    }
    let sets: Vec<_> = (0..8)
        .map(|i| rescaled_pair(&environment(0.5, 0.05 + 0.01 * i as f64), 500, 20))
        .collect();
    g.bench_function("hausdorff 8x8", |bch| {
        bch.iter_batched(
            || {
                (
                    sets.iter().map(|s| s.0.clone()).collect::<Vec<_>>(),
                    sets.iter().map(|s| s.1.clone()).collect::<Vec<_>>(),
                )
            },
            |(k1, k2)| black_box(hausdorff(&k1, &k2).unwrap()),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, forward, backward, metric);
criterion_main!(benches);
