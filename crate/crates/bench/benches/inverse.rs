use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use primequo_core::class::{check_k_almost_increasing, pseudo_inverse};
use primequo_core::{FunctionOracle, InverseTable, PrimeTable};

fn inverse(c: &mut Criterion) {
    let table = Arc::new(PrimeTable::sieve(20_000_000).unwrap());
    let f = FunctionOracle::prime_quotient(table.clone());
    let limit = table.count() - 1;

    c.bench_function("finv prime n=13 cold", |b| {
        b.iter(|| pseudo_inverse(&f, black_box(13), limit).unwrap())
    });
    c.bench_function("finv prime 11..=14 table", |b| {
        b.iter(|| {
            let mut inv = InverseTable::new(&f);
            (11..=14).map(|n| inv.get(n, limit).unwrap()).sum::<u64>()
        })
    });
    let sqrt = FunctionOracle::sqrt_like(1).unwrap();
    c.bench_function("finv sqrt-like n=2000", |b| {
        b.iter(|| pseudo_inverse(&sqrt, black_box(2000), 1 << 40).unwrap())
    });
    c.bench_function("almost-increasing prime 2e5", |b| {
        b.iter(|| {
            check_k_almost_increasing(&f, 1, black_box(200_000))
                .unwrap()
                .passed()
        })
    });
}

criterion_group!(benches, inverse);
criterion_main!(benches);
