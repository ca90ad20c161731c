use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use walsh_trunc::par::{map_indexed, map_indexed_seq};
use walsh_trunc::spectral::lanczos_norm;
use walsh_trunc::{TruncationMap, TwhMatrix};

fn batch(level: u32, count: usize) -> Vec<TwhMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(level as u64);
    (0..count)
        .map(|_| TwhMatrix::new(TruncationMap::random_dyadic(level, &mut rng).unwrap()))
        .collect()
}

fn norm_batches(c: &mut Criterion) {
    let mut group = c.benchmark_group("lanczos_batch");
    group.sample_size(10);
    for level in [6u32, 8, 10] {
        let mats = batch(level, 32);
        let run = |i: usize| lanczos_norm(&mats[i], 1e-11, i as u64).unwrap().norm;
        group.bench_with_input(BenchmarkId::new("sequential", level), &level, |b, _| {
            b.iter(|| map_indexed_seq(mats.len(), run))
        });
        group.bench_with_input(BenchmarkId::new("parallel", level), &level, |b, _| {
            b.iter(|| map_indexed(mats.len(), run))
        });
    }
    group.finish();
}

criterion_group!(benches, norm_batches);
criterion_main!(benches);
