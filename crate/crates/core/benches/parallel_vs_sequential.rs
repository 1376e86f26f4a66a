use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sparse_gep::applications::{pca_pair, PcaScale};
use sparse_gep::gep::{lambda_max, Method, OuterConfig};
use sparse_gep::penalty::PenaltyKind;
use sparse_gep::simulation::{gen_pca, run_experiment, ExperimentSpec, Family, Model};
use sparse_gep::tuning::{fit_path, lambda_grid};
use sparse_gep::Execution;

fn modes() -> Vec<Execution> {
    if sparse_gep::exec::parallel_available() {
        vec![Execution::Sequential, Execution::Parallel]
    } else {
        vec![Execution::Sequential]
    }
}

fn bench_path(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (x, _) = gen_pca(Model::I, 3, 200, 100, &mut rng).unwrap();
    let pair = pca_pair(&x, PcaScale::Covariance).unwrap();
    let lmax = lambda_max(&pair, Method::Poi, PenaltyKind::GroupRow, 3).unwrap();
    let grid = lambda_grid(lmax, 0.75, 15).unwrap();
    let cfg = OuterConfig::default();

    let mut group = c.benchmark_group("fit_path_pca_p200");
    group.sample_size(10);
    for exec in modes() {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| {
                b.iter(|| {
                    fit_path(
                        black_box(&pair),
                        3,
                        PenaltyKind::GroupRow,
                        Method::Poi,
                        &grid,
                        &cfg,
                        exec,
                    )
                })
            },
        );
    }
    group.finish();
}

fn bench_experiment(c: &mut Criterion) {
    let mut spec = ExperimentSpec::defaults(Family::Lda);
    spec.repetitions = 4;
    spec.n_test = 100;

    let mut group = c.benchmark_group("lda_experiment_4_reps");
    group.sample_size(10);
    for exec in modes() {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| run_experiment(black_box(&spec), exec).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_path, bench_experiment);
criterion_main!(benches);
