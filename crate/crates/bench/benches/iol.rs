use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use edrvfl_iol::features::{Activation, EdRvflConfig, EdRvflNetwork, FeatureMap};
use edrvfl_iol::iol::{init_learner, smw_rate_update, Style};
use edrvfl_iol::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::hint::black_box;

fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn smw(c: &mut Criterion) {
    let mut group = c.benchmark_group("smw_rate_update");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (p, b) in [(24, 10), (101, 65), (736, 480)] {
        let eta = Mat::identity(p, p) * 0.5;
        let d = randn(&mut rng, b, p);
        group.bench_with_input(BenchmarkId::from_parameter(format!("p{p}_b{b}")), &(eta, d), |bench, (eta, d)| {
            bench.iter(|| smw_rate_update(black_box(eta), black_box(d)).unwrap())
        });
    }
    group.finish();
}

fn steps(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (p, b) = (101, 65);
    let d = randn(&mut rng, b, p);
    let dn = randn(&mut rng, b, p);
    let y = randn(&mut rng, b, 1);
    let ridge = init_learner(1.0, p, 1, Style::Ridge, None).unwrap();
    let forward = init_learner(1.0, p, 1, Style::Forward, None).unwrap().prime(&d).unwrap();
    c.bench_function("ridge_step_p101_b65", |bench| {
        bench.iter(|| ridge.ridge_step(black_box(&d), black_box(&y)).unwrap())
    });
    c.bench_function("forward_step_p101_b65", |bench| {
        bench.iter(|| forward.forward_step(black_box(&d), black_box(&y), black_box(&dn)).unwrap())
    });
}

fn features(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = EdRvflNetwork::new(EdRvflConfig::new(16, 85, Activation::Sigmoid, 16.0, 0), 9).unwrap();
    let x = randn(&mut rng, 65, 9);
    c.bench_function("extract_features_L16_N85_b65", |bench| {
        bench.iter(|| net.features(black_box(&x)).unwrap())
    });
}

criterion_group!(benches, smw, steps, features);
criterion_main!(benches);
