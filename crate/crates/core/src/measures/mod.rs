//! Proximity measures between patent classes.
//!
//! Four data choices turn a corpus into per-class sparse count vectors
//! ([`build_features`]), and four measures score any pair of vectors
//! ([`jaccard`], [`cosine`], [`pearson`], [`relative_entropy`]). The sixteen
//! combinations each yield one symmetric [`ProximityMatrix`] over the class
//! vocabulary, always oriented higher-is-closer (entropy distances are
//! stored negated).

mod features;
mod matrix;
mod scores;

pub use features::{build_features, DataChoice, FeatureSet, SparseFeature};
pub use matrix::{
    build_proximity_matrix, MatrixSidecar, MeasureCombo, MeasureKind, ProximityMatrix,
};
pub use scores::{cosine, jaccard, pearson, relative_entropy, MeasureError};

/// Default additive smoothing for the relative-entropy measure.
pub const DEFAULT_EPSILON: f64 = 1e-9;
