use cenbar::{
    bar_fit, coordinate_descent, fit_cbar_cv, fit_censoring_survivor, leurgans_transform,
    BarConfig, CvOptions, PenaltyKind, PenaltySpec,
};
use cenbar_bench::{dataset, prepared};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn transform(c: &mut Criterion) {
    let mut group = c.benchmark_group("leurgans_transform");
    for n in [100, 1000, 5000] {
        let data = dataset(n, 1, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, data| {
            b.iter(|| {
                let surv = fit_censoring_survivor(black_box(data)).unwrap();
                leurgans_transform(data, &surv).unwrap()
            })
        });
    }
    group.finish();
}

fn bar(c: &mut Criterion) {
    let mut group = c.benchmark_group("bar_fit");
    for p in [10, 50, 200] {
        let (design, y) = prepared(400, p, 2);
        let config = BarConfig::new(1.0, 5.0);
        group.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, _| {
            b.iter(|| bar_fit(black_box(&design), &y, &config).unwrap())
        });
    }
    group.finish();
}

fn cross_validation(c: &mut Criterion) {
    let (design, y) = prepared(100, 10, 3);
    let options = CvOptions::default();
    c.bench_function("fit_cbar_cv/n100_p10", |b| {
        b.iter(|| fit_cbar_cv(black_box(&design), &y, &options, None).unwrap())
    });
}

fn descent(c: &mut Criterion) {
    let mut group = c.benchmark_group("coordinate_descent");
    let (design, y) = prepared(200, 50, 4);
    for kind in [PenaltyKind::Lasso, PenaltyKind::Scad, PenaltyKind::Mcp] {
        let spec = PenaltySpec::new(kind, 0.5);
        group.bench_function(kind.name(), |b| {
            b.iter(|| coordinate_descent(black_box(&design), &y, &spec, 1e-7, 10_000).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, transform, bar, cross_validation, descent);
criterion_main!(benches);
