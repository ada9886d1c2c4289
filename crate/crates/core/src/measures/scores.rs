//! Pairwise similarity and distance scores over sparse feature vectors.
//!
//! All four functions treat their inputs as vectors over a shared key space
//! and iterate the merged key union in ascending key order, so results are
//! bit-for-bit reproducible regardless of how the features were accumulated.

use thiserror::Error;

use super::features::SparseFeature;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("pearson dimension {dimension} smaller than union support {union}")]
    DimensionTooSmall { dimension: usize, union: usize },
    #[error("relative entropy undefined: both distributions empty")]
    EmptyDistributions,
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("matrix csv malformed: {0}")]
    MatrixCsv(String),
}

/// Visit the union of two sorted sparse vectors in ascending key order,
/// yielding the count on each side (zero where absent).
fn merge_union(a: &SparseFeature, b: &SparseFeature, mut visit: impl FnMut(u32, u32, u32)) {
    let (a, b) = (a.entries(), b.entries());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (ka, ca) = a[i];
        let (kb, cb) = b[j];
        match ka.cmp(&kb) {
            std::cmp::Ordering::Less => {
                visit(ka, ca, 0);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                visit(kb, 0, cb);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                visit(ka, ca, cb);
                i += 1;
                j += 1;
            }
        }
    }
    for &(k, c) in &a[i..] {
        visit(k, c, 0);
    }
    for &(k, c) in &b[j..] {
        visit(k, 0, c);
    }
}

/// Jaccard index of the two supports: |A ∩ B| / |A ∪ B|. Two empty supports
/// score 0.
pub fn jaccard(a: &SparseFeature, b: &SparseFeature) -> f64 {
    let mut inter = 0u64;
    let mut union = 0u64;
    merge_union(a, b, |_, ca, cb| {
        union += 1;
        if ca > 0 && cb > 0 {
            inter += 1;
        }
    });
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Cosine similarity of the two count vectors. A zero vector on either side
/// scores 0.
pub fn cosine(a: &SparseFeature, b: &SparseFeature) -> f64 {
    let mut dot = 0.0f64;
    merge_union(a, b, |_, ca, cb| {
        if ca > 0 && cb > 0 {
            dot += ca as f64 * cb as f64;
        }
    });
    let norm_sq = |f: &SparseFeature| -> f64 {
        f.entries()
            .iter()
            .map(|&(_, c)| c as f64 * c as f64)
            .sum()
    };
    let (na, nb) = (norm_sq(a), norm_sq(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Sample Pearson correlation of the two count vectors embedded in a dense
/// space of `dimension` cells; cells outside the supports are zeros and do
/// participate in means and variances. Zero variance on either side scores
/// 0. Fails when `dimension` cannot hold the union support.
pub fn pearson(
    a: &SparseFeature,
    b: &SparseFeature,
    dimension: usize,
) -> Result<f64, MeasureError> {
    let mut union = 0usize;
    let mut sxy = 0.0f64;
    merge_union(a, b, |_, ca, cb| {
        union += 1;
        if ca > 0 && cb > 0 {
            sxy += ca as f64 * cb as f64;
        }
    });
    if dimension < union {
        return Err(MeasureError::DimensionTooSmall { dimension, union });
    }
    let sums = |f: &SparseFeature| -> (f64, f64) {
        let mut s = 0.0f64;
        let mut ss = 0.0f64;
        for &(_, c) in f.entries() {
            s += c as f64;
            ss += c as f64 * c as f64;
        }
        (s, ss)
    };
    let (sx, sxx) = sums(a);
    let (sy, syy) = sums(b);
    let n = dimension as f64;
    let var_x = n * sxx - sx * sx;
    let var_y = n * syy - sy * sy;
    if var_x <= 0.0 || var_y <= 0.0 {
        return Ok(0.0);
    }
    let r = (n * sxy - sx * sy) / (var_x.sqrt() * var_y.sqrt());
    Ok(r.clamp(-1.0, 1.0))
}

/// Symmetrized relative entropy (Jeffreys divergence) between the two count
/// vectors, smoothed and normalized over the union of their supports:
/// every union cell gains `epsilon`, both vectors are renormalized to
/// probability distributions, and
/// `D = [Σ p ln(p/q) + Σ q ln(q/p)] / 2` (natural log).
///
/// `D ≥ 0`, `D = 0` iff the smoothed distributions coincide. Two empty
/// vectors leave the union empty and the distance undefined; callers rank
/// such pairs worst.
pub fn relative_entropy(
    a: &SparseFeature,
    b: &SparseFeature,
    epsilon: f64,
) -> Result<f64, MeasureError> {
    let epsilon_valid = epsilon.is_finite() && epsilon > 0.0;
    if !epsilon_valid {
        return Err(MeasureError::InvalidEpsilon(epsilon));
    }
    if a.is_empty() && b.is_empty() {
        return Err(MeasureError::EmptyDistributions);
    }
    let mut denom_a = 0.0f64;
    let mut denom_b = 0.0f64;
    merge_union(a, b, |_, ca, cb| {
        denom_a += ca as f64 + epsilon;
        denom_b += cb as f64 + epsilon;
    });
    let mut acc = 0.0f64;
    merge_union(a, b, |_, ca, cb| {
        let p = (ca as f64 + epsilon) / denom_a;
        let q = (cb as f64 + epsilon) / denom_b;
        acc += p * (p / q).ln() + q * (q / p).ln();
    });
    Ok((acc / 2.0).max(0.0))
}
