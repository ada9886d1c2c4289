//! Per-class sparse feature vectors for each data choice.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClassId, Corpus};

/// Which raw signal feeds a measure, and at which granularity.
///
/// - [`DataChoice::RefPat`]: references resolved to specific cited patents
/// - [`DataChoice::RefClass`]: references resolved to the cited patents' classes
/// - [`DataChoice::CoPat`]: class-to-patent assignment membership
/// - [`DataChoice::CoClass`]: class co-occurrence on the same patents
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataChoice {
    RefPat,
    RefClass,
    CoPat,
    CoClass,
}

impl DataChoice {
    pub const ALL: [DataChoice; 4] = [
        DataChoice::RefPat,
        DataChoice::RefClass,
        DataChoice::CoPat,
        DataChoice::CoClass,
    ];

    /// Row order used by the AUC summary table: class-to-class reference,
    /// class-to-patent reference, then the co-classification pair.
    pub const TABLE_ORDER: [DataChoice; 4] = [
        DataChoice::RefClass,
        DataChoice::RefPat,
        DataChoice::CoClass,
        DataChoice::CoPat,
    ];

    pub fn id(self) -> &'static str {
        match self {
            DataChoice::RefPat => "ref_pat",
            DataChoice::RefClass => "ref_class",
            DataChoice::CoPat => "co_pat",
            DataChoice::CoClass => "co_class",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DataChoice::RefPat => "class-to-patent reference",
            DataChoice::RefClass => "class-to-class reference",
            DataChoice::CoPat => "class-to-patent co-classification",
            DataChoice::CoClass => "class-to-class co-classification",
        }
    }
}

impl fmt::Display for DataChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for DataChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataChoice::ALL
            .into_iter()
            .find(|d| d.id() == s)
            .ok_or_else(|| {
                format!(
                    "unknown data choice {s:?} (expected one of ref_pat, ref_class, co_pat, co_class)"
                )
            })
    }
}

/// Sparse non-negative count vector for one class. Keys index the data
/// choice's feature space (cited-key table, patent table, or vocabulary);
/// entries are sorted by key and never store zero counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseFeature {
    class: ClassId,
    entries: Vec<(u32, u32)>,
}

impl SparseFeature {
    /// Build from (key, count) pairs; zero counts are dropped.
    pub fn new(class: ClassId, mut entries: Vec<(u32, u32)>) -> SparseFeature {
        entries.retain(|&(_, count)| count > 0);
        entries.sort_unstable_by_key(|&(key, _)| key);
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseFeature { class, entries }
    }

    pub fn class(&self) -> &ClassId {
        &self.class
    }

    /// Sorted (key, count) pairs.
    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, key: u32) -> u32 {
        self.entries
            .binary_search_by_key(&key, |&(k, _)| k)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn count_sum(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c as u64).sum()
    }
}

/// One sparse feature per vocabulary class, for one data choice, plus the
/// total feature-space size (the vector length once off-support zeros are
/// counted, as the Pearson measure requires).
#[derive(Debug, Clone)]
pub struct FeatureSet {
    data_choice: DataChoice,
    dimension: usize,
    features: Vec<SparseFeature>,
}

impl FeatureSet {
    pub fn data_choice(&self) -> DataChoice {
        self.data_choice
    }

    /// Total feature-space size: distinct cited keys (RefPat), corpus
    /// patents (CoPat), or vocabulary classes (RefClass, CoClass).
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Features in vocabulary order.
    pub fn features(&self) -> &[SparseFeature] {
        &self.features
    }

    pub fn get(&self, class: &ClassId) -> Option<&SparseFeature> {
        self.features
            .binary_search_by(|f| f.class.cmp(class))
            .ok()
            .map(|i| &self.features[i])
    }
}

/// Build the per-class sparse vectors for one data choice.
///
/// A patent assigned to multiple classes contributes its references (and its
/// co-assignments) to every one of its classes. For `RefClass`, references
/// whose cited id does not resolve to a corpus patent are skipped; for
/// `RefPat` they are counted under their opaque token. `CoClass` excludes
/// the owning class from its own vector.
pub fn build_features(corpus: &Corpus, data_choice: DataChoice) -> FeatureSet {
    let n = corpus.class_count();
    let mut acc: Vec<HashMap<u32, u32>> = vec![HashMap::new(); n];

    match data_choice {
        DataChoice::RefPat => {
            for patent in corpus.patents() {
                for &class in patent.class_indices() {
                    let map = &mut acc[class as usize];
                    for &key in patent.reference_keys() {
                        *map.entry(key).or_insert(0) += 1;
                    }
                }
            }
        }
        DataChoice::RefClass => {
            for patent in corpus.patents() {
                for &class in patent.class_indices() {
                    let map = &mut acc[class as usize];
                    for &key in patent.reference_keys() {
                        if let Some(cited) = corpus.resolve_cited(key) {
                            for &cited_class in
                                corpus.patents()[cited as usize].class_indices()
                            {
                                *map.entry(cited_class).or_insert(0) += 1;
                            }
                        }
                    }
                }
            }
        }
        DataChoice::CoPat => {
            for (pi, patent) in corpus.patents().iter().enumerate() {
                for &class in patent.class_indices() {
                    acc[class as usize].insert(pi as u32, 1);
                }
            }
        }
        DataChoice::CoClass => {
            for patent in corpus.patents() {
                let classes = patent.class_indices();
                for &ci in classes {
                    let map = &mut acc[ci as usize];
                    for &cj in classes {
                        if ci != cj {
                            *map.entry(cj).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
    }

    let dimension = match data_choice {
        DataChoice::RefPat => corpus.cited_keys().len(),
        DataChoice::CoPat => corpus.patent_count(),
        DataChoice::RefClass | DataChoice::CoClass => n,
    };

    let features = acc
        .into_iter()
        .enumerate()
        .map(|(i, map)| {
            SparseFeature::new(
                corpus.class(i as u32).clone(),
                map.into_iter().collect(),
            )
        })
        .collect();

    FeatureSet {
        data_choice,
        dimension,
        features,
    }
}
