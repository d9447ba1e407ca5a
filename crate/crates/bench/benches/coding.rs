use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use dlbound::bounds::full_report;
use dlbound::experiments::DistributionSpec;
use dlbound::learning::{learn, LearnConfig};
use dlbound::sparse_coding::{brute_force_code, sparse_code};
use dlbound::{BoundInputs, Dictionary, Penalty, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn sparse_coding(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dict = Dictionary::random(8, 12, &mut rng).unwrap();
    let signals = DistributionSpec::uniform_sphere(8, 2).sample(64).unwrap();
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("sparse_code m=8 d=12");
    for (name, p, q) in [
        ("lasso", 1.0, 1.0),
        ("ridge", 2.0, 2.0),
        ("half", 0.5, 0.5),
        ("p=0.5 q=1", 0.5, 1.0),
    ] {
        let pen = Penalty::new(p, q, 10.0).unwrap();
        let mut i = 0;
        group.bench_function(name, |b| {
            b.iter(|| {
                i = (i + 1) % signals.n();
                sparse_code(black_box(signals.signal(i)), &dict, &pen, &cfg).unwrap()
            })
        });
    }
    group.finish();
}

fn grid_oracle(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pen = Penalty::new(1.0, 1.0, 1.0).unwrap();
    let x = ndarray::array![0.3, -0.5, 0.4];
    let mut group = c.benchmark_group("brute_force_code");
    group.sample_size(10);
    for d in [2, 3] {
        let dict = Dictionary::random(3, d, &mut rng).unwrap();
        group.bench_function(format!("d={d} grid=2001"), |b| {
            b.iter(|| brute_force_code(black_box(x.view()), &dict, &pen, None, 2001).unwrap())
        });
    }
    group.finish();
}

fn bound_report(c: &mut Criterion) {
    let inputs = BoundInputs {
        m: 16,
        d: 32,
        pen: Penalty::new(0.5, 1.0, 1.0).unwrap(),
        n: 1_000_000,
        confidence_x: 0.0,
        lipschitz: None,
    };
    c.bench_function("full_report", |b| {
        b.iter(|| full_report(black_box(&inputs), None).unwrap())
    });
}

fn learning(c: &mut Criterion) {
    let set = DistributionSpec::planted_sparse(8, 12, 2, 1.0, 4, 5)
        .sample(200)
        .unwrap();
    let pen = Penalty::new(1.0, 1.0, 10.0).unwrap();
    let cfg = LearnConfig {
        outer_iters: 5,
        ..LearnConfig::default()
    };
    let mut group = c.benchmark_group("learn");
    group.sample_size(10);
    group.bench_function("n=200 m=8 d=12, 5 rounds", |b| {
        b.iter_batched(
            || set.clone(),
            |s| learn(&s, 8, 12, &pen, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, sparse_coding, grid_oracle, bound_report, learning);
criterion_main!(benches);
