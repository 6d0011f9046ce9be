use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use leverage_core::experiments::{run_asymmetry_experiment, AsymmetryOptions, InterventionSpec};
use leverage_core::ingest::{ScenarioConfig, DEFAULT_SCENARIO};
use leverage_core::simulator::run_batch;
use leverage_core::Execution;

fn modes() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", Execution::Parallel));
    v
}

fn replicas(c: &mut Criterion) {
    let scenario = ScenarioConfig::from_toml(DEFAULT_SCENARIO).unwrap();
    let mut config = scenario.sim_config().unwrap();
    config.duration_cv = 0.1;

    let mut group = c.benchmark_group("simulate_batch");
    group.sample_size(20);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new(name, 200), &exec, |b, &exec| {
            b.iter(|| run_batch(black_box(&config), 200, exec).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("asymmetry_experiment");
    group.sample_size(10);
    let a = InterventionSpec::BoostRhoIn { factor: 2.0 };
    let b = InterventionSpec::BoostRhoOut { factor: 2.0 };
    for (name, exec) in modes() {
        let opts = AsymmetryOptions {
            exec,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::new(name, 100), &opts, |bench, opts| {
            bench.iter(|| run_asymmetry_experiment(black_box(&config), a, b, 100, opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replicas);
criterion_main!(benches);
