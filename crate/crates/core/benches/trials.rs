use criterion::{criterion_group, criterion_main, Criterion};
use streamlabel_core::harness::{
    run_experiment_with, ArrivalSpec, Execution, ExperimentConfig, GpSettings, PolicySpec, TaskSpec,
};

fn discrete() -> ExperimentConfig {
    ExperimentConfig {
        name: "bench-discrete".into(),
        task: TaskSpec::DiscreteGaussian { num_types: 100 },
        arrival: ArrivalSpec::Uniform,
        policy: PolicySpec::DiscreteThreshold,
        cost_b: 10.0,
        lambda: 2.0,
        sigma: 0.1,
        delta: 0.05,
        horizon_t: 10_000,
        trial_seeds: (0..16).collect(),
        output_dir: None,
        gp: GpSettings::default(),
    }
}

fn branin() -> ExperimentConfig {
    ExperimentConfig {
        name: "bench-branin".into(),
        task: TaskSpec::Branin,
        policy: PolicySpec::GpThreshold,
        lambda: 1.0,
        sigma: 5.0,
        horizon_t: 150,
        trial_seeds: (0..8).collect(),
        ..discrete()
    }
}

fn bench(c: &mut Criterion) {
    for (name, config) in [("discrete", discrete()), ("branin", branin())] {
        let mut group = c.benchmark_group(name);
        group.sample_size(10);
        for (label, exec) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel),
        ] {
            group.bench_function(label, |b| {
                b.iter(|| run_experiment_with(&config, exec).unwrap())
            });
        }
        group.finish();
    }
}

criterion_group!(benches, bench);
criterion_main!(benches);
