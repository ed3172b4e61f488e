use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use privpac::domain::{Concept, ConceptClass};
use privpac::harness::{run_pac_experiment_with, DistributionSpec, LearnerKind, PacConfig};
use privpac::learners::{LearnerParams, PointFallback, RectangleKnobs};
use privpac::parallel::map_trials_sequential;
use privpac::sanitizers::{san_points, SanitizerParams};
use privpac::Randomness;

fn threshold_config(trials: u64) -> PacConfig {
    PacConfig {
        class: ConceptClass::threshold(16).unwrap(),
        learner: LearnerKind::Threshold,
        distribution: DistributionSpec::Uniform,
        target: Some(Concept::threshold(16, 40_000).unwrap()),
        m: 20_000,
        trials,
        params: LearnerParams::new(0.25, 0.1, 1.0, 1e-6)
            .unwrap()
            .with_budget(2)
            .unvalidated(),
        knobs: RectangleKnobs::default(),
        fallback: PointFallback::RandomPoint,
        seed: 7,
    }
}

fn learner_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("threshold_trials");
    group.sample_size(10);
    for trials in [16u64, 64] {
        let cfg = threshold_config(trials);
        group.bench_with_input(BenchmarkId::new("sequential", trials), &cfg, |b, cfg| {
            b.iter(|| black_box(run_pac_experiment_with(cfg, false).unwrap()))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", trials), &cfg, |b, cfg| {
            b.iter(|| black_box(run_pac_experiment_with(cfg, true).unwrap()))
        });
    }
    group.finish();
}

fn sanitizer_trials(c: &mut Criterion) {
    let params = SanitizerParams::new(0.3, 0.1, 1.0, 0.01)
        .unwrap()
        .unvalidated();
    let db =
        privpac::domain::Database::new(10, (0..5000).map(|i| [7, 300][i % 2]).collect()).unwrap();
    let master = Randomness::from_seed(11);
    let run = |_: u64, r: &mut Randomness| san_points(&db, &params, r).unwrap().rounds.len();
    let mut group = c.benchmark_group("san_points_trials");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(map_trials_sequential(64, &master, run)))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(privpac::parallel::map_trials_parallel(64, &master, run)))
    });
    group.finish();
}

criterion_group!(benches, learner_trials, sanitizer_trials);
criterion_main!(benches);
