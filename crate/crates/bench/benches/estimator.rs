use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use synthctl_core::estimator::{fit, solve_w, NelderMeadSettings, PredictorMatrices, SolverSettings, VWeights};
use synthctl_core::inference::{run_placebos, PlaceboSettings};
use synthctl_core::simulate::{generate, FactorModelConfig};

fn inner(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_w");
    for &(p, m) in &[(4usize, 4usize), (6, 19), (12, 50)] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mats = PredictorMatrices::from_parts(
            DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(p, m, |_, _| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let v = VWeights::equal(p);
        group.bench_with_input(BenchmarkId::from_parameter(format!("p{p}_m{m}")), &mats, |b, mats| {
            b.iter(|| solve_w(black_box(mats), &v).unwrap())
        });
    }
    group.finish();
}

fn outer(c: &mut Criterion) {
    let sim = generate(&FactorModelConfig {
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("default_20_units", |b| {
        b.iter(|| fit(&sim.panel, &sim.design, &sim.spec, &SolverSettings::default()).unwrap())
    });
    let quick = SolverSettings {
        outer_starts: 2,
        outer: NelderMeadSettings {
            max_evals: 150,
            ..Default::default()
        },
        ..Default::default()
    };
    group.bench_function("quick_20_units", |b| {
        b.iter(|| fit(&sim.panel, &sim.design, &sim.spec, &quick).unwrap())
    });
    group.finish();

    let mut group = c.benchmark_group("placebo");
    group.sample_size(10);
    let settings = PlaceboSettings {
        solver: quick,
        filter_k: None,
    };
    group.bench_function("quick_20_units", |b| {
        b.iter(|| run_placebos(&sim.panel, &sim.design, &sim.spec, &settings).unwrap())
    });
    group.finish();
}

criterion_group!(benches, inner, outer);
criterion_main!(benches);
