use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plfc_core::bench::{run_ari_benchmark, BenchConfig};
use plfc_core::clustering::{select_k_majority, KMeansOptions};
use plfc_core::segmentation::{segment_all, SegmentOptions};
use plfc_core::simulation::{sample_dataset, JitterSet, ModelKind, ModelSpec};
use plfc_core::{featurize, scale_features, Exec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn segmentation(c: &mut Criterion) {
    let sim = sample_dataset(&ModelSpec::model1(), 1.0, 100, 1, JitterSet::Verbatim, Exec::Parallel).unwrap();
    let opts = SegmentOptions::default();
    let mut g = c.benchmark_group("segment_all_100");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| segment_all(black_box(&sim.dataset), &opts, exec).unwrap())
        });
    }
    g.finish();
}

fn clustering(c: &mut Criterion) {
    let sim = sample_dataset(&ModelSpec::model2(), 1.0, 100, 2, JitterSet::Verbatim, Exec::Parallel).unwrap();
    let segs = segment_all(&sim.dataset, &SegmentOptions::default(), Exec::Parallel).unwrap();
    let (scaled, _) = scale_features(&featurize(&segs).unwrap().rows).unwrap();
    let opts = KMeansOptions::default();
    let mut g = c.benchmark_group("select_k_majority_2_8");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| select_k_majority(black_box(&scaled), 2, 8, &opts, exec).unwrap())
        });
    }
    g.finish();
}

fn replicate(c: &mut Criterion) {
    let cfg = BenchConfig {
        model: ModelKind::Model1,
        sigmas: vec![1.0],
        replicates: 1,
        seed: 3,
        ..Default::default()
    };
    let mut g = c.benchmark_group("ari_replicate");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_ari_benchmark(black_box(&cfg), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, segmentation, clustering, replicate);
criterion_main!(benches);
