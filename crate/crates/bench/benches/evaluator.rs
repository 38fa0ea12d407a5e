use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use primequo_bench::{relations, sqrt_fixture};
use primequo_core::formula::{parse_formula, Evaluator};
use primequo_core::Assignment;

fn evaluator(c: &mut Criterion) {
    let (f, _, _) = sqrt_fixture();
    let [ftilde, csquare, mult] = relations();

    let mut group = c.benchmark_group("eval");
    group.sample_size(20);
    group.bench_function("ftilde x=500", |b| {
        let a = Assignment::new().with("x", 500).with("y", 31);
        b.iter(|| {
            Evaluator::new(&f)
                .eval_formula(&ftilde.formula, black_box(&a))
                .unwrap()
        })
    });
    group.bench_function("csquare n=50", |b| {
        let a = Assignment::new().with("n", 50).with("y", 12_500);
        b.iter(|| {
            Evaluator::new(&f)
                .eval_formula(&csquare.formula, black_box(&a))
                .unwrap()
        })
    });
    for (z, label) in [(600, "true"), (601, "false")] {
        group.bench_function(format!("mult 20*30 {label}"), |b| {
            let a = Assignment::new().with("a", 20).with("b", 30).with("z", z);
            b.iter(|| {
                Evaluator::new(&f)
                    .eval_formula(&mult.formula, black_box(&a))
                    .unwrap()
            })
        });
    }
    group.bench_function("mult memo reuse", |b| {
        let ev = Evaluator::new(&f);
        let prog = ev.compile(&mult.formula).unwrap();
        let a = Assignment::new().with("a", 20).with("b", 30).with("z", 600);
        b.iter(|| prog.eval_formula(black_box(&a)).unwrap())
    });
    group.finish();

    let text = mult.formula.to_string();
    c.bench_function("parse mult text", |b| {
        b.iter(|| parse_formula(black_box(&text)).unwrap())
    });
    c.bench_function("print mult text", |b| {
        b.iter(|| mult.formula.to_string().len())
    });
}

criterion_group!(benches, evaluator);
criterion_main!(benches);
