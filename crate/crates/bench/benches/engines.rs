use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use watchdog_bench::observation;
use watchdog_core::watchdog::{algebraic_check, build_trellis, consistency_probability};
use watchdog_core::{canonical_spec, run_trials, AdversaryStrategy, SimConfig};

fn field_mul(c: &mut Criterion) {
    let mut group = c.benchmark_group("gf_mul");
    for n in [4u32, 8, 12, 16] {
        let f = canonical_spec(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs: Vec<(u32, u32)> = (0..1024)
            .map(|_| (rng.random_range(0..f.order()), rng.random_range(0..f.order())))
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &pairs, |b, pairs| {
            b.iter(|| pairs.iter().fold(0, |acc, &(x, y)| acc ^ f.mul_words(x, y)))
        });
    }
    group.finish();
}

fn engines(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    for n in [8u32, 10, 12] {
        let obs = observation(n, 4, 0.1, 0x11);
        group.bench_with_input(BenchmarkId::new("algebraic", n), &obs, |b, obs| {
            b.iter(|| algebraic_check(black_box(obs)))
        });
        group.bench_with_input(BenchmarkId::new("trellis", n), &obs, |b, obs| {
            b.iter(|| consistency_probability(&build_trellis(black_box(obs))))
        });
    }
    group.finish();
}

fn harness(c: &mut Criterion) {
    let cfg = SimConfig::uniform(8, 3, 0.1, 0.01, AdversaryStrategy::RandomNonzeroError, 2000, 9);
    c.bench_function("run_trials_n8_2000", |b| b.iter(|| run_trials(black_box(&cfg)).unwrap()));
}

criterion_group!(benches, field_mul, engines, harness);
criterion_main!(benches);
