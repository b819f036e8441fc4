use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use svir_core::algebra::{super_jacobi_report_with, AlgebraConfig, BasisSymbol, Epsilon};
use svir_core::automorphisms::{apply_table, is_automorphism_table_with, AutParams, Sign};
use svir_core::derivations::{default_ansatz, image_intersection_with, leibniz_violations_with, probe_family, MapTable};
use svir_core::linalg::Window;
use svir_core::scalar::Scalar;
use svir_core::Strategy;

const STRATEGIES: [(&str, Strategy); 2] = [("sequential", Strategy::Sequential), ("parallel", Strategy::Parallel)];

fn jacobi(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobi_sweep");
    group.sample_size(10);
    let cfg = AlgebraConfig::new(Epsilon::Zero, true);
    for (name, strategy) in STRATEGIES {
        group.bench_with_input(BenchmarkId::new(name, 5), &5, |b, &r| {
            b.iter(|| black_box(super_jacobi_report_with(&cfg, r, strategy)))
        });
    }
    group.finish();
}

fn leibniz(c: &mut Criterion) {
    let mut group = c.benchmark_group("leibniz_sweep");
    group.sample_size(10);
    let cfg = AlgebraConfig::new(Epsilon::Half, true);
    let u = "L(2) - 3*G(1/2) + (1/2)*G(-3/2) + C".parse().unwrap();
    let t = MapTable::ad(cfg, &u, 8).unwrap();
    for (name, strategy) in STRATEGIES {
        group.bench_function(name, |b| b.iter(|| black_box(leibniz_violations_with(&t, 4, strategy).unwrap())));
    }
    group.finish();
}

fn intersection(c: &mut Criterion) {
    let mut group = c.benchmark_group("image_intersection");
    group.sample_size(10);
    let cfg = AlgebraConfig::centerless();
    let xs: Vec<Scalar> = (1..=8).map(Scalar::from_int).collect();
    let probes = probe_family(&BasisSymbol::l(1).elem(), &BasisSymbol::l(0).elem(), &xs);
    let target = Window::radius(cfg, 6);
    let ansatz = default_ansatz(&cfg, &probes, &target);
    for (name, strategy) in STRATEGIES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(image_intersection_with(&cfg, &probes, &ansatz, &target, strategy).unwrap()))
        });
    }
    group.finish();
}

fn automorphism_check(c: &mut Criterion) {
    let mut group = c.benchmark_group("automorphism_check");
    group.sample_size(10);
    let cfg = AlgebraConfig::new(Epsilon::Zero, true);
    let p = AutParams::new(&cfg, Sign::Minus, Scalar::ratio(-3, 2), Scalar::i(), None).unwrap();
    let t = apply_table(&cfg, &p, 12).unwrap();
    for (name, strategy) in STRATEGIES {
        group.bench_function(name, |b| b.iter(|| black_box(is_automorphism_table_with(&t, 6, strategy).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, jacobi, leibniz, intersection, automorphism_check);
criterion_main!(benches);
