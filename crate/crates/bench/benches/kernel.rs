use std::hint::black_box;

use alpha_lattice::stable::{ou_abs_moment, ou_apply, sample_standard_stable, LineFunction, StableCdf, StableDensity};
use alpha_lattice::{KernelGrid, StableParams};
use alpha_lattice_bench::{criterion, params};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn density(c: &mut Criterion) {
    let grid = KernelGrid::default();
    let mut g = c.benchmark_group("density");
    for alpha in [1.2, 1.5, 2.0] {
        let p = StableParams::new(alpha).unwrap();
        g.bench_with_input(BenchmarkId::new("build", alpha), &p, |b, p| {
            b.iter(|| StableDensity::new(black_box(1.0), *p, &grid).unwrap())
        });
        let d = StableDensity::new(1.0, p, &grid).unwrap();
        g.bench_with_input(BenchmarkId::new("eval_100", alpha), &d, |b, d| {
            b.iter(|| (0..100).map(|k| d.at(black_box(k as f64 * 0.3 - 15.0)).unwrap()).sum::<f64>())
        });
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let grid = KernelGrid::default();
    let p = params();
    c.bench_function("ou_apply tanh", |b| {
        let f = LineFunction::new(f64::tanh);
        b.iter(|| ou_apply(&f, black_box(0.7), 0.3, p, &grid).unwrap())
    });
    c.bench_function("ou_abs_moment", |b| b.iter(|| ou_abs_moment(black_box(1.0), 1.0, p, &grid).unwrap()));
    c.bench_function("cdf table", |b| b.iter(|| StableCdf::new(black_box(1.0), p, &grid).unwrap()));
}

fn sampler(c: &mut Criterion) {
    let mut g = c.benchmark_group("sampler");
    for alpha in [1.2, 1.5, 2.0] {
        let p = StableParams::new(alpha).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(alpha), &p, |b, p| {
            b.iter(|| {
                (1..=1000)
                    .map(|k| sample_standard_stable(*p, k as f64 / 1001.0, 0.37))
                    .sum::<f64>()
            })
        });
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = criterion();
    targets = density, quadrature, sampler
}
criterion_main!(benches);
