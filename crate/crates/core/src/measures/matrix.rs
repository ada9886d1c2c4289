//! Symmetric class-by-class proximity matrices.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassId, Corpus};

use super::features::{build_features, DataChoice, FeatureSet};
use super::scores::{cosine, jaccard, pearson, relative_entropy, MeasureError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Jaccard,
    Cosine,
    Pearson,
    Entropy,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 4] = [
        MeasureKind::Jaccard,
        MeasureKind::Cosine,
        MeasureKind::Pearson,
        MeasureKind::Entropy,
    ];

    pub fn id(self) -> &'static str {
        match self {
            MeasureKind::Jaccard => "jaccard",
            MeasureKind::Cosine => "cosine",
            MeasureKind::Pearson => "pearson",
            MeasureKind::Entropy => "entropy",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MeasureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MeasureKind::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| {
                format!(
                    "unknown measure {s:?} (expected one of jaccard, cosine, pearson, entropy)"
                )
            })
    }
}

/// One (data choice, measure) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MeasureCombo {
    pub data_choice: DataChoice,
    pub measure: MeasureKind,
}

impl MeasureCombo {
    pub fn new(data_choice: DataChoice, measure: MeasureKind) -> Self {
        MeasureCombo {
            data_choice,
            measure,
        }
    }

    /// Stable identifier, e.g. `ref_pat_jaccard`. Lexicographic order over
    /// these ids is the deterministic tie-break everywhere.
    pub fn id(self) -> String {
        format!("{}_{}", self.data_choice.id(), self.measure.id())
    }

    /// All sixteen combinations, data choice outer, measure inner.
    pub fn all() -> Vec<MeasureCombo> {
        DataChoice::ALL
            .into_iter()
            .flat_map(|d| MeasureKind::ALL.into_iter().map(move |m| Self::new(d, m)))
            .collect()
    }

    pub fn from_id(id: &str) -> Option<MeasureCombo> {
        Self::all().into_iter().find(|c| c.id() == id)
    }
}

impl fmt::Display for MeasureCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.data_choice.id(), self.measure.id())
    }
}

/// Symmetric proximity scores over a sorted class vocabulary, oriented so
/// that a higher score always means closer. Jaccard and cosine live in
/// [0, 1], Pearson in [-1, 1]; entropy distances D are stored as -D, with
/// -inf marking pairs whose distance is undefined (both features empty) so
/// they rank last. Diagonal cells hold a NaN sentinel and are never read.
#[derive(Debug, Clone)]
pub struct ProximityMatrix {
    classes: Vec<ClassId>,
    data_choice: DataChoice,
    measure: MeasureKind,
    epsilon: f64,
    higher_is_closer: bool,
    scores: Vec<f64>,
}

impl ProximityMatrix {
    /// Score every unordered class pair of a feature set.
    pub fn compute(
        features: &FeatureSet,
        measure: MeasureKind,
        epsilon: f64,
    ) -> Result<ProximityMatrix, MeasureError> {
        let epsilon_valid = epsilon.is_finite() && epsilon > 0.0;
        if measure == MeasureKind::Entropy && !epsilon_valid {
            return Err(MeasureError::InvalidEpsilon(epsilon));
        }
        let feats = features.features();
        let n = feats.len();
        let dimension = features.dimension();
        let pairs: Vec<(u32, u32)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i as u32, j as u32)))
            .collect();
        // Fixed pair order plus an index-preserving collect keeps the result
        // identical for any worker count.
        let pair_scores: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (&feats[i as usize], &feats[j as usize]);
                match measure {
                    MeasureKind::Jaccard => jaccard(a, b),
                    MeasureKind::Cosine => cosine(a, b),
                    MeasureKind::Pearson => pearson(a, b, dimension)
                        .expect("feature-space dimension covers every union support"),
                    MeasureKind::Entropy => match relative_entropy(a, b, epsilon) {
                        Ok(d) => -d,
                        Err(_) => f64::NEG_INFINITY,
                    },
                }
            })
            .collect();

        let mut scores = vec![f64::NAN; n * n];
        for (&(i, j), &s) in pairs.iter().zip(&pair_scores) {
            scores[i as usize * n + j as usize] = s;
            scores[j as usize * n + i as usize] = s;
        }
        Ok(ProximityMatrix {
            classes: feats.iter().map(|f| f.class().clone()).collect(),
            data_choice: features.data_choice(),
            measure,
            epsilon,
            higher_is_closer: true,
            scores,
        })
    }

    /// Build a matrix from explicit pair scores (tests, calibration). The
    /// class list must be sorted; `score(i, j)` is asked once per `i < j`.
    pub fn from_pair_scores(
        classes: Vec<ClassId>,
        data_choice: DataChoice,
        measure: MeasureKind,
        mut score: impl FnMut(usize, usize) -> f64,
    ) -> ProximityMatrix {
        debug_assert!(classes.windows(2).all(|w| w[0] < w[1]));
        let n = classes.len();
        let mut scores = vec![f64::NAN; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let s = score(i, j);
                scores[i * n + j] = s;
                scores[j * n + i] = s;
            }
        }
        ProximityMatrix {
            classes,
            data_choice,
            measure,
            epsilon: super::DEFAULT_EPSILON,
            higher_is_closer: true,
            scores,
        }
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_index(&self, class: &ClassId) -> Option<usize> {
        self.classes.binary_search(class).ok()
    }

    pub fn data_choice(&self) -> DataChoice {
        self.data_choice
    }

    pub fn measure(&self) -> MeasureKind {
        self.measure
    }

    pub fn combo(&self) -> MeasureCombo {
        MeasureCombo::new(self.data_choice, self.measure)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn higher_is_closer(&self) -> bool {
        self.higher_is_closer
    }

    /// Off-diagonal score. The diagonal is a sentinel and must not be read.
    #[inline]
    pub fn score(&self, i: usize, j: usize) -> f64 {
        debug_assert_ne!(i, j, "diagonal sentinel must not be read");
        self.scores[i * self.classes.len() + j]
    }

    /// Same matrix with every off-diagonal score mapped through `f`.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> ProximityMatrix {
        let n = self.classes.len();
        let mut scores = self.scores.clone();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    scores[i * n + j] = f(self.scores[i * n + j]);
                }
            }
        }
        ProximityMatrix {
            classes: self.classes.clone(),
            data_choice: self.data_choice,
            measure: self.measure,
            epsilon: self.epsilon,
            higher_is_closer: self.higher_is_closer,
            scores,
        }
    }

    /// CSV rendering: header plus one row per unordered pair, lexicographic
    /// by (class_i, class_j). Scores print in shortest round-trip form, so
    /// re-parsing reproduces the exact bits.
    pub fn to_csv(&self) -> String {
        let n = self.classes.len();
        let mut out = String::from("class_i,class_j,score\n");
        for i in 0..n {
            for j in (i + 1)..n {
                out.push_str(&format!(
                    "{},{},{}\n",
                    self.classes[i],
                    self.classes[j],
                    self.score(i, j)
                ));
            }
        }
        out
    }

    /// Reconstruct a matrix from its CSV body and sidecar.
    pub fn from_csv(sidecar: &MatrixSidecar, csv: &str) -> Result<ProximityMatrix, MeasureError> {
        let classes = sidecar.classes.clone();
        if !classes.windows(2).all(|w| w[0] < w[1]) {
            return Err(MeasureError::MatrixCsv(
                "sidecar class list not sorted".into(),
            ));
        }
        let n = classes.len();
        let mut scores = vec![f64::NAN; n * n];
        let mut lines = csv.lines();
        match lines.next() {
            Some("class_i,class_j,score") => {}
            other => {
                return Err(MeasureError::MatrixCsv(format!(
                    "bad header {other:?}"
                )))
            }
        }
        let mut filled = 0usize;
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let (ci, cj, raw) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(MeasureError::MatrixCsv(format!(
                        "row {}: expected 3 fields",
                        lineno + 2
                    )))
                }
            };
            let find = |code: &str| {
                classes
                    .binary_search_by(|c| c.as_str().cmp(code))
                    .map_err(|_| {
                        MeasureError::MatrixCsv(format!(
                            "row {}: class {code:?} not in sidecar vocabulary",
                            lineno + 2
                        ))
                    })
            };
            let (i, j) = (find(ci)?, find(cj)?);
            if i == j {
                return Err(MeasureError::MatrixCsv(format!(
                    "row {}: diagonal pair {ci:?}",
                    lineno + 2
                )));
            }
            let score: f64 = raw.parse().map_err(|_| {
                MeasureError::MatrixCsv(format!("row {}: bad score {raw:?}", lineno + 2))
            })?;
            scores[i * n + j] = score;
            scores[j * n + i] = score;
            filled += 1;
        }
        if filled != n * (n - 1) / 2 {
            return Err(MeasureError::MatrixCsv(format!(
                "expected {} pair rows, found {filled}",
                n * (n - 1) / 2
            )));
        }
        // Duplicate rows could satisfy the count while leaving a pair unset.
        for i in 0..n {
            for j in 0..n {
                if i != j && scores[i * n + j].is_nan() {
                    return Err(MeasureError::MatrixCsv(format!(
                        "pair ({}, {}) missing",
                        classes[i], classes[j]
                    )));
                }
            }
        }
        Ok(ProximityMatrix {
            classes,
            data_choice: sidecar.data_choice,
            measure: sidecar.measure,
            epsilon: sidecar.epsilon,
            higher_is_closer: true,
            scores,
        })
    }

    pub fn sidecar(&self, corpus_digest: String, config_digest: Option<String>) -> MatrixSidecar {
        MatrixSidecar {
            data_choice: self.data_choice,
            measure: self.measure,
            orientation: "higher_is_closer".to_string(),
            corpus_digest,
            epsilon: self.epsilon,
            classes: self.classes.clone(),
            config_digest,
        }
    }
}

/// JSON sidecar accompanying every exported matrix CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub data_choice: DataChoice,
    pub measure: MeasureKind,
    pub orientation: String,
    pub corpus_digest: String,
    pub epsilon: f64,
    pub classes: Vec<ClassId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

/// Build the proximity matrix for one (data choice, measure) pair straight
/// from a corpus.
pub fn build_proximity_matrix(
    corpus: &Corpus,
    data_choice: DataChoice,
    measure: MeasureKind,
    epsilon: f64,
) -> Result<ProximityMatrix, MeasureError> {
    let features = build_features(corpus, data_choice);
    ProximityMatrix::compute(&features, measure, epsilon)
}
