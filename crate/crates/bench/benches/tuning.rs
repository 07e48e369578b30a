use criterion::{criterion_group, criterion_main, Criterion};
use dgsim_core::autotune::{tune, Fixture, TuneKernel, TuneSpace};
use dgsim_core::mesh::generate_box_mesh;

fn sweep(c: &mut Criterion) {
    let fixture = Fixture { mesh: generate_box_mesh([1.0; 3], [1; 3]).unwrap(), order: 3, seed: 0 };
    let mut g = c.benchmark_group("tune");
    g.sample_size(10);
    for kernel in [TuneKernel::Diff, TuneKernel::Lift, TuneKernel::Gather] {
        let mut space = TuneSpace::new(kernel);
        space.w_p = vec![1, 2];
        space.w_i = vec![1, 2];
        g.bench_function(format!("{kernel:?}").to_lowercase(), |b| b.iter(|| tune(&space, &fixture).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
