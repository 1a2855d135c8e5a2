//! Throughput of the optimizers and of the model evaluations they drive.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use exemplar_core::fixtures::{multimodal_oracle, random_classifier};
use exemplar_core::{
    composite_gradient, rng_streams, run_es, run_gd, BuiltinFixture, EsConfig, GdConfig, GdStart, LatentVector, Oracle,
};
use rand::Rng;

fn es_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("es");
    let p = BuiltinFixture::Multimodal.build();
    for alpha in [0.0, 0.3] {
        let cfg = EsConfig {
            alpha,
            latent_dim: 4,
            ..EsConfig::default()
        };
        let mut trial = 0;
        group.bench_function(format!("multimodal_alpha_{alpha}"), |b| {
            b.iter(|| {
                trial += 1;
                black_box(run_es(&cfg, &*p.generator, &*p.oracle, &mut rng_streams(0, trial)).unwrap())
            })
        });
    }
    group.finish();
}

fn gd_runs(c: &mut Criterion) {
    let p = BuiltinFixture::Saddle.build();
    let cfg = GdConfig {
        latent_dim: 2,
        ..GdConfig::default()
    };
    let mut trial = 0;
    c.bench_function("gd/saddle_random_start", |b| {
        b.iter(|| {
            trial += 1;
            black_box(
                run_gd(
                    &cfg,
                    &*p.generator,
                    &*p.oracle,
                    GdStart::Random,
                    &mut rng_streams(0, trial),
                )
                .unwrap(),
            )
        })
    });
}

fn batch(n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_streams(1, 0);
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect()
}

fn oracle_batches(c: &mut Criterion) {
    let mut group = c.benchmark_group("predict_batch");
    let centroid = multimodal_oracle();
    let mlp = random_classifier();
    for n in [20, 200] {
        let xs = batch(n, 4);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_function(format!("centroid_{n}"), |b| {
            b.iter(|| centroid.predict_batch(black_box(&xs)).unwrap())
        });
        group.bench_function(format!("mlp_4x8x3_{n}"), |b| {
            b.iter(|| mlp.predict_batch(black_box(&xs)).unwrap())
        });
    }
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let mut group = c.benchmark_group("composite_gradient");
    for fixture in BuiltinFixture::DIFFERENTIABLE {
        let p = fixture.build();
        group.bench_function(fixture.name(), |b| {
            b.iter_batched(
                || LatentVector::new(batch(1, fixture.latent_dim()).remove(0)).unwrap(),
                |z| composite_gradient(&*p.generator, &*p.oracle, &z, 0).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, es_runs, gd_runs, oracle_batches, gradients);
criterion_main!(benches);
