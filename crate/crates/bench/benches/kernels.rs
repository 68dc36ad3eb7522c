use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kdepth::{
    depth_rank, gram, two_sample_test, GaussianEmbedding, KernelSpec, RadialFamily, RadialKappa,
};
use kdepth_bench::{reference_measure, reference_sample};

fn bench_gram(c: &mut Criterion) {
    let k = KernelSpec::se_unit();
    let mut group = c.benchmark_group("gram");
    for n in [100, 400] {
        let s = reference_sample(n, 0.0, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| gram(&k, black_box(s), black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn bench_depth_rank(c: &mut Criterion) {
    let kappa = RadialKappa::unnormalized(RadialFamily::Se, 1.0).unwrap();
    let mut group = c.benchmark_group("depth_rank");
    for n in [100, 400] {
        let s = reference_sample(n, 0.0, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| depth_rank(&kappa, black_box(s)))
        });
    }
    group.finish();
}

fn bench_two_sample_test(c: &mut Criterion) {
    let k = KernelSpec::se_unit();
    let x = reference_sample(50, 0.0, 3);
    let y = reference_sample(50, 0.2, 4);
    c.bench_function("two_sample_test/n50_B199", |b| {
        b.iter(|| two_sample_test(&k, black_box(&x), black_box(&y), 199, 0.05, 0).unwrap())
    });
}

fn bench_gaussian_embedding(c: &mut Criterion) {
    let g = reference_measure(0.0);
    let k = KernelSpec::se_unit();
    let probes = reference_sample(100, 0.0, 5);
    c.bench_function("gaussian_embedding/new", |b| {
        b.iter(|| GaussianEmbedding::new(black_box(&g), &k).unwrap())
    });
    let emb = GaussianEmbedding::new(&g, &k).unwrap();
    c.bench_function("gaussian_embedding/eval_100", |b| {
        b.iter(|| probes.rows().map(|x| emb.eval_values(black_box(x))).sum::<f64>())
    });
}

criterion_group!(benches, bench_gram, bench_depth_rank, bench_two_sample_test, bench_gaussian_embedding);
criterion_main!(benches);
