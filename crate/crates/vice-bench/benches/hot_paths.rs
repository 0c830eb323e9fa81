use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vice_bench::training_fixture;
use vice_core::eval::predict_mc;
use vice_core::optim::batch_objective_with_grad;
use vice_core::pruning::{select_dimensions, significant_object_count};

fn bench_objective_and_grad(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_objective_with_grad");
    for (m, d) in [(30, 20), (200, 50), (1854, 100)] {
        let fx = training_fixture(m, d, 7);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{m}x{d}")),
            &fx,
            |b, fx| {
                b.iter(|| {
                    batch_objective_with_grad(&fx.params, &fx.prior, &fx.batch, fx.n, &fx.noise)
                        .unwrap()
                })
            },
        );
    }
    group.finish();
}

fn bench_predict_mc(c: &mut Criterion) {
    let fx = training_fixture(200, 50, 11);
    c.bench_function("predict_mc_r50", |b| {
        b.iter(|| predict_mc(&fx.params, [3, 70, 150], 50, 5).unwrap())
    });
}

fn bench_dimension_selection(c: &mut Criterion) {
    let fx = training_fixture(1854, 100, 13);
    c.bench_function("select_dimensions_1854x100", |b| {
        b.iter(|| select_dimensions(&fx.params, 0.05, 5))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p_values: Vec<f64> = (0..1854).map(|_| rng.gen_range(0.0..1.0)).collect();
    c.bench_function("bh_count_m1854", |b| {
        b.iter(|| significant_object_count(&p_values, 0.05))
    });
}

criterion_group!(
    benches,
    bench_objective_and_grad,
    bench_predict_mc,
    bench_dimension_selection
);
criterion_main!(benches);
