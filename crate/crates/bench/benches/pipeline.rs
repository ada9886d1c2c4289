use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use techspace::corpus::AgentKind;
use techspace::evaluation::{pooled_evaluation, PooledOptions};
use techspace::mapping::extract_backbone;
use techspace::measures::{build_features, DataChoice, MeasureKind, ProximityMatrix};
use techspace::synth::{perf_bundle, PerfParams};
use techspace_bench::bench_corpus;

fn bench_ingest(c: &mut Criterion) {
    let params = PerfParams {
        n_patents: 10_000,
        n_classes: 326,
        n_agents: 200,
        ..PerfParams::default()
    };
    let bundle = perf_bundle(&params);
    let mut group = c.benchmark_group("ingest");
    group.sample_size(10);
    group.bench_function("10k_patents", |b| {
        b.iter(|| black_box(bundle.build_corpus().unwrap()))
    });
    group.finish();
}

fn bench_features(c: &mut Criterion) {
    let corpus = bench_corpus();
    let mut group = c.benchmark_group("build_features");
    group.sample_size(10);
    for data_choice in DataChoice::ALL {
        group.bench_with_input(
            BenchmarkId::from_parameter(data_choice.id()),
            &data_choice,
            |b, &dc| b.iter(|| black_box(build_features(&corpus, dc))),
        );
    }
    group.finish();
}

fn bench_matrices(c: &mut Criterion) {
    let corpus = bench_corpus();
    let features = build_features(&corpus, DataChoice::RefPat);
    let mut group = c.benchmark_group("matrix_ref_pat");
    group.sample_size(10);
    for measure in MeasureKind::ALL {
        group.bench_with_input(
            BenchmarkId::from_parameter(measure.id()),
            &measure,
            |b, &m| b.iter(|| black_box(ProximityMatrix::compute(&features, m, 1e-9).unwrap())),
        );
    }
    group.finish();
}

fn bench_evaluation(c: &mut Criterion) {
    let corpus = bench_corpus();
    let matrices: Vec<ProximityMatrix> = DataChoice::ALL
        .into_iter()
        .map(|dc| {
            let features = build_features(&corpus, dc);
            ProximityMatrix::compute(&features, MeasureKind::Jaccard, 1e-9).unwrap()
        })
        .collect();
    let opts = PooledOptions {
        min_classes: 10,
        curve_points: 101,
    };
    let mut group = c.benchmark_group("evaluation");
    group.sample_size(10);
    group.bench_function("pooled_4_matrices", |b| {
        b.iter(|| {
            black_box(pooled_evaluation(&corpus, &matrices, AgentKind::Inventor, &opts).unwrap())
        })
    });
    group.finish();
}

fn bench_backbone(c: &mut Criterion) {
    let corpus = bench_corpus();
    let features = build_features(&corpus, DataChoice::RefPat);
    let matrix = ProximityMatrix::compute(&features, MeasureKind::Jaccard, 1e-9).unwrap();
    let mut group = c.benchmark_group("backbone");
    group.bench_function("forest_plus_1000", |b| {
        b.iter(|| black_box(extract_backbone(&matrix, 1000).unwrap()))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_ingest,
    bench_features,
    bench_matrices,
    bench_evaluation,
    bench_backbone
);
criterion_main!(benches);
