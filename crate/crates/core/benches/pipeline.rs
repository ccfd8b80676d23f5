//! Parallel against sequential execution for the two data-parallel hot
//! paths: the randomized benchmark and dense trajectory regression.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gmm_reparam::bench::{run_benchmark, BenchConfig};
use gmm_reparam::gmr::{default_times, regress, Mixture};
use gmm_reparam::model::{fit_demonstrations, FitConfig, GmmModel};
use gmm_reparam::scene::{Scene, Variation};
use gmm_reparam::synth::{generate_demonstrations, SynthConfig};
use gmm_reparam::Execution;

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn fitted() -> (Scene, GmmModel) {
    let scene = Scene::desk_default();
    let synth = SynthConfig::for_scene(&scene);
    let demos = generate_demonstrations(&scene, &synth).unwrap();
    let model = fit_demonstrations(&demos, synth.phases(), &FitConfig::default())
        .unwrap()
        .model;
    (scene, model)
}

fn benchmark_trials(c: &mut Criterion) {
    let (scene, model) = fitted();
    let reference = regress(&model, &default_times(model.duration, 100.0)).unwrap();
    let cfg = BenchConfig {
        variation: Variation::Combined,
        ..BenchConfig::default()
    };
    let mut group = c.benchmark_group("benchmark_50_trials");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_benchmark(&model, &reference, &scene, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn regression(c: &mut Criterion) {
    let (_, model) = fitted();
    let regressor = model.regressor();
    let times = default_times(model.duration, 1000.0);
    let mut group = c.benchmark_group("regress_7001_samples");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| regressor.trajectory(&times, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, benchmark_trials, regression);
criterion_main!(benches);
