use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use mpmi_bench::Fixture;
use mpmi_core::baselines::{discrepancy_alpha, tsvd_solve_discrepancy, RegMethod};
use mpmi_core::mpmi::mpmi_solve;
use mpmi_core::quartic::solve_quartic_monotone;
use mpmi_core::svd;

fn quartic(c: &mut Criterion) {
    let ts: Vec<f64> = (0..1000).map(|i| 27.0 / 16.0 * i as f64 / 999.0).collect();
    c.bench_function("quartic_1000", |b| {
        b.iter(|| {
            ts.iter()
                .map(|&t| solve_quartic_monotone(black_box(t)).unwrap())
                .sum::<f64>()
        })
    });
}

fn factorization(c: &mut Criterion) {
    let small = Fixture::poisson(60, 61, 0.05);
    let desk = Fixture::desk(0.05);
    c.bench_function("svd_60x61", |b| {
        b.iter(|| svd(black_box(&small.problem.matrix)).unwrap())
    });
    let mut g = c.benchmark_group("svd_desk");
    g.sample_size(10);
    g.bench_function("svd_199x201", |b| {
        b.iter_batched(
            || desk.problem.matrix.clone(),
            |a| svd(&a).unwrap(),
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

fn solvers(c: &mut Criterion) {
    let fx = Fixture::desk(0.05);
    c.bench_function("mpmi_solve_desk", |b| {
        b.iter(|| mpmi_solve(&fx.factors, &fx.u_delta, black_box(fx.delta_abs)).unwrap())
    });
    c.bench_function("tsvd_solve_desk", |b| {
        b.iter(|| tsvd_solve_discrepancy(&fx.factors, &fx.u_delta, black_box(fx.delta_abs)).unwrap())
    });
    c.bench_function("tikhonov_alpha_desk", |b| {
        b.iter(|| {
            discrepancy_alpha(
                &fx.factors,
                fx.u_delta.as_slice(),
                black_box(fx.delta_abs),
                RegMethod::Tikhonov,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, quartic, factorization, solvers);
criterion_main!(benches);
