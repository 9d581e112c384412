use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ergodyn::coupling::{gluing_coupling, GluingOptions};
use ergodyn::models::{ornstein_uhlenbeck, random_chain, Ladder, Pdmp, PdmpParams};
use ergodyn::numerics::linalg::expm;
use ergodyn::process::simulate_trajectory;

fn matrix_exponential(c: &mut Criterion) {
    let chain = random_chain(10, 1, 0.5, 2.0).unwrap();
    let q = chain.generator() * 0.7;
    c.bench_function("expm_10x10", |b| b.iter(|| expm(black_box(&q))));
}

fn paths(c: &mut Criterion) {
    let pdmp = Pdmp::new(&PdmpParams::new(Ladder::Arithmetic { first: 1.0, gap: 1.0 }, 0.5)).unwrap();
    let mut seed = 0;
    c.bench_function("pdmp_path_horizon_100", |b| {
        b.iter(|| {
            seed += 1;
            simulate_trajectory(&pdmp, &0.5, 100.0, seed).unwrap()
        })
    });
    let ou = ornstein_uhlenbeck(1.0, 2.0).unwrap();
    c.bench_function("ou_path_horizon_1", |b| {
        b.iter(|| {
            seed += 1;
            simulate_trajectory(&ou, &0.0, 1.0, seed).unwrap()
        })
    });
}

fn gluing(c: &mut Criterion) {
    let chain = random_chain(5, 2, 0.5, 2.0).unwrap();
    let opts = GluingOptions::default();
    let mut seed = 0;
    c.bench_function("gluing_chain_5", |b| {
        b.iter(|| {
            seed += 1;
            gluing_coupling(&chain, &0, &4, 0.25, seed, &opts).unwrap()
        })
    });
}

criterion_group!(benches, matrix_exponential, paths, gluing);
criterion_main!(benches);
