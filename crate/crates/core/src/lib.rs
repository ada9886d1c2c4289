//! Knowledge-proximity analysis over patent classification networks.
//!
//! The crate turns a corpus of patents (filing dates, CPC class assignments,
//! backward citations, and agent links) into class-to-class proximity
//! matrices, scores how well each proximity measure explains agents'
//! historical diversification across classes, and extracts spanning-forest
//! backbones for technology-space maps.
//!
//! Pipeline: [`corpus`] → [`measures`] → [`evaluation`] / [`mapping`].
//! [`synth`] generates deterministic synthetic corpora for calibration,
//! benchmarking and tests.

pub mod corpus;
pub mod digest;
pub mod evaluation;
pub mod mapping;
pub mod measures;
pub mod synth;

pub use corpus::{
    load_corpus, truncate_cpc, AgentId, AgentKind, ClassId, Corpus, CorpusBuilder, CorpusError,
    CorpusPaths, CpcLevel, IngestOptions, IngestSummary, PatentRecord,
};
pub use evaluation::{
    cumulative_curve, entry_sequence, evaluate_agent, explanatory_power, pooled_evaluation,
    portfolio_proximity, rank_percentile, AgentEvaluation, EntrySequence, EvalError,
    EvaluationReport, PooledOptions,
};
pub use mapping::{
    export_graph, extract_backbone, maximum_spanning_forest, BackboneEdge, BackboneNetwork,
    GraphFormat, MapError,
};
pub use measures::{
    build_features, build_proximity_matrix, cosine, jaccard, pearson, relative_entropy,
    DataChoice, FeatureSet, MatrixSidecar, MeasureCombo, MeasureError, MeasureKind,
    ProximityMatrix, SparseFeature,
};
