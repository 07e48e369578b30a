use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dgsim_bench::{box_discretization, cavity_solver};
use dgsim_core::maxwell::{stable_dt, Material, DEFAULT_CFL};
use dgsim_core::ReferenceElement;

fn reference_element(c: &mut Criterion) {
    let mut g = c.benchmark_group("reference_element");
    for n in [3, 6] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| ReferenceElement::new(n).unwrap())
        });
    }
    g.finish();
}

fn rk_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("rk_step");
    g.sample_size(10);
    for n in [1, 2, 3, 4] {
        let dt = stable_dt(&box_discretization(n, 2), &Material::default(), DEFAULT_CFL).unwrap();
        let mut s = cavity_solver(n, 2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| s.step(dt).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, reference_element, rk_step);
criterion_main!(benches);
