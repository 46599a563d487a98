use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use egosocial::consistency::{apply_consistency, ConsistencyThresholds};
use egosocial::reid::{cluster_ahc, compute_distances, AhcParams, Metric};
use egosocial::segmentation::{segment, SegmentationParams};
use egosocial::synth::{generate, RandomSchedule, SynthConfig, SynthDataset};
use egosocial::Execution;

const PATHS: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn dataset(events_per_day: usize) -> SynthDataset {
    generate(&SynthConfig {
        seed: 7,
        n_days: 3,
        n_identities: 40,
        dropout_rate: 0.05,
        random_schedule: Some(RandomSchedule {
            events_per_day,
            min_minutes: 3.0,
            max_minutes: 30.0,
        }),
        ..Default::default()
    })
    .unwrap()
}

fn distances(c: &mut Criterion) {
    let synth = dataset(40);
    let obs = synth.dataset.observations();
    let mut g = c.benchmark_group(format!("distances/{}", obs.len()));
    for metric in [Metric::Euclidean, Metric::Correlation] {
        for (name, exec) in PATHS {
            g.bench_with_input(BenchmarkId::new(metric.to_string(), name), &exec, |b, &exec| {
                b.iter(|| compute_distances(black_box(obs), metric, true, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn consistency(c: &mut Criterion) {
    let synth = dataset(40);
    let obs = synth.dataset.observations();
    let raw = cluster_ahc(obs, &AhcParams::default(), Execution::Parallel).unwrap();
    let thresholds = ConsistencyThresholds::default();
    let mut g = c.benchmark_group("consistency");
    for (name, exec) in PATHS {
        g.bench_function(name, |b| {
            b.iter(|| apply_consistency(black_box(&raw), obs, &thresholds, exec).unwrap())
        });
    }
    g.finish();
}

fn end_to_end(c: &mut Criterion) {
    let synth = dataset(25);
    let obs = synth.dataset.observations();
    let mut g = c.benchmark_group("cluster_filter_segment");
    g.sample_size(20);
    for (name, exec) in PATHS {
        g.bench_function(name, |b| {
            b.iter(|| {
                let raw = cluster_ahc(obs, &AhcParams::default(), exec).unwrap();
                let (kept, _) = apply_consistency(&raw, obs, &ConsistencyThresholds::default(), exec).unwrap();
                segment(&kept, obs, &SegmentationParams::default(), exec).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, distances, consistency, end_to_end);
criterion_main!(benches);
