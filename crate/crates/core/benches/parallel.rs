//! Sequential against rayon execution for the two data-parallel hot paths.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sympflow::integrate::{generate_dataset, DatasetSpec};
use sympflow::par::Execution;
use sympflow::train::{objective_gradient, sample_collocation, Batches, Objective, Target};
use sympflow::{BoxDomain, DerivativeMode, SympFlowModel, SystemSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn loss_gradient(c: &mut Criterion) {
    let sys = SystemSpec::sho();
    let domain = BoxDomain::cube(2, 1.2);
    let model = SympFlowModel::random(1, 10, 5, &mut ChaCha8Rng::seed_from_u64(0));
    let batches = Batches {
        residual: sample_collocation(&domain, 1.0, 256, 1).unwrap(),
        matching: sample_collocation(&domain, 1.0, 256, 2).unwrap(),
    };
    let mut group = c.benchmark_group("loss_gradient");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 256), |b| {
            b.iter(|| {
                objective_gradient(
                    black_box(&model),
                    Objective::ResidualPlusEnergy,
                    &batches,
                    Target::System(&sys),
                    DerivativeMode::Exact,
                    exec,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn dataset(c: &mut Criterion) {
    let sys = SystemSpec::HenonHeiles;
    let domain = BoxDomain::cube(4, 1.0);
    let spec = DatasetSpec {
        trajectories: 64,
        samples_per_trajectory: 10,
        dt: 1.0,
        noise_std: 0.0,
        seed: 0,
    };
    let mut group = c.benchmark_group("generate_dataset");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, spec.trajectories), |b| {
            b.iter(|| generate_dataset(&sys, &domain, black_box(&spec), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, loss_gradient, dataset);
criterion_main!(benches);
