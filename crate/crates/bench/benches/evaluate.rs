use criterion::{criterion_group, criterion_main, Criterion};
use mideu::oracle::joint_eu_numeric;
use mideu::sensitivity::apply_spec;
use mideu::transforms::to_extensive_form;
use mideu::{symbolic_eu, EUVector};
use mideu_bench::cases;
use std::hint::black_box;

fn symbolic(c: &mut Criterion) {
    let mut g = c.benchmark_group("symbolic_eu");
    for case in cases() {
        g.bench_function(case.name, |b| b.iter(|| symbolic_eu(black_box(&case.model.mid), &case.policy).unwrap()));
    }
    g.finish();
}

fn transform(c: &mut Criterion) {
    let mut g = c.benchmark_group("to_extensive_form");
    for case in cases() {
        g.bench_function(case.name, |b| b.iter(|| to_extensive_form(black_box(&case.model.mid)).unwrap()));
    }
    g.finish();
}

fn substitution(c: &mut Criterion) {
    let mut g = c.benchmark_group("substitute_vs_oracle");
    for case in cases() {
        let Ok(spec) = case.model.spec("complete") else { continue };
        let root = symbolic_eu(&case.model.mid, &case.policy).unwrap();
        let root: EUVector = root.stage(1).unwrap().clone();
        let (numeric, _) = spec.to_numeric(&case.model.mid).unwrap().filled(&case.model.mid);
        g.bench_function(format!("{}/substitute", case.name), |b| {
            b.iter(|| apply_spec(&case.model.mid, black_box(&root), spec).unwrap())
        });
        g.bench_function(format!("{}/oracle", case.name), |b| {
            b.iter(|| joint_eu_numeric(&case.model.mid, black_box(&numeric), &case.policy).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, symbolic, transform, substitution);
criterion_main!(benches);
