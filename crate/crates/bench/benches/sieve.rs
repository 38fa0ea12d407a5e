use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use primequo_core::prime::{PrimeTable, SieveConfig};

fn sieve(c: &mut Criterion) {
    let mut group = c.benchmark_group("sieve");
    group.sample_size(10);
    for limit in [1_000_000u64, 10_000_000, 100_000_000] {
        group.throughput(Throughput::Elements(limit));
        group.bench_with_input(BenchmarkId::from_parameter(limit), &limit, |b, &limit| {
            b.iter(|| PrimeTable::sieve(black_box(limit)).unwrap().count())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("sieve-segment");
    group.sample_size(10);
    for segment_len in [1 << 14, 1 << 16, 1 << 18, 1 << 20] {
        let config = SieveConfig { segment_len };
        group.bench_with_input(
            BenchmarkId::from_parameter(segment_len),
            &config,
            |b, config| {
                b.iter(|| {
                    PrimeTable::sieve_with(black_box(10_000_000), config)
                        .unwrap()
                        .count()
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, sieve);
criterion_main!(benches);
