//! Shared fixtures for the pipeline benchmarks.

use techspace::synth::{perf_bundle, PerfParams};
use techspace::Corpus;

/// Mid-size corpus: a tenth of the desk-scale run, enough to expose the
/// quadratic pair-scoring cost without making `cargo bench` take minutes
/// per sample.
pub fn bench_corpus() -> Corpus {
    let params = PerfParams {
        n_patents: 10_000,
        n_classes: 326,
        n_agents: 200,
        ..PerfParams::default()
    };
    let (corpus, _) = perf_bundle(&params).build_corpus().expect("valid corpus");
    corpus
}
