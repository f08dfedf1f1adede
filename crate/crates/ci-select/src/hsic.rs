//! Class-conditioned kernel independence scoring.
//!
//! For each class c with n_c members, the dependence between embeddings
//! and a pseudo-label is measured by the biased estimator
//!
//! ```text
//! HSIC_c = (1/n_c^2) trace(K_c H_c L_c H_c),   H = I - (1/n) 1 1'
//! ```
//!
//! with a cosine kernel K on the flattened embeddings and an RBF kernel L
//! on the (optionally z-scored) pseudo-label values. The aggregate
//! contamination score is the member-weighted mean over classes:
//! `CI = (1/M) sum_c HSIC_c * n_c`, `M = sum_c n_c`. Low CI means the
//! embedding carries little class-internal information about the label.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::embed::FixedEmbedding;
use crate::error::{Error, Result};

/// Aggregate scores below this are treated as numerical noise; anything
/// more negative indicates a broken kernel and is an internal error.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SquareMatrix { n, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

/// One class's members, as indices into the parallel id/embedding/value
/// arrays of the evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGroup {
    pub class_label: String,
    pub member_ids: Vec<String>,
    pub indices: Vec<usize>,
}

impl ClassGroup {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Kernel pair for one class, validated against the kernel invariants.
#[derive(Debug, Clone)]
pub struct KernelMatrixPair {
    pub class_label: String,
    pub n: usize,
    pub k: SquareMatrix,
    pub l: SquareMatrix,
}

impl KernelMatrixPair {
    /// Check shapes, symmetry, unit diagonals, and entry ranges
    /// (K in [-1, 1], L in (0, 1]).
    pub fn new(class_label: impl Into<String>, k: SquareMatrix, l: SquareMatrix) -> Result<Self> {
        let class_label = class_label.into();
        if k.n != l.n {
            return Err(Error::Internal(format!(
                "kernel sizes disagree for class `{class_label}`: {}x{} vs {}x{}",
                k.n, k.n, l.n, l.n
            )));
        }
        let n = k.n;
        if n == 0 {
            return Err(Error::Internal(format!("empty kernels for class `{class_label}`")));
        }
        for (name, m) in [("K", &k), ("L", &l)] {
            for i in 0..n {
                if m.get(i, i) != 1.0 {
                    return Err(Error::Internal(format!(
                        "{name}[{i},{i}] = {} for class `{class_label}`, diagonal must be 1",
                        m.get(i, i)
                    )));
                }
                for j in 0..i {
                    if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 {
                        return Err(Error::Internal(format!(
                            "{name} not symmetric at ({i},{j}) for class `{class_label}`"
                        )));
                    }
                }
            }
        }
        for &v in &k.data {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Internal(format!(
                    "cosine kernel entry {v} outside [-1, 1] for class `{class_label}`"
                )));
            }
        }
        for &v in &l.data {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Internal(format!(
                    "rbf kernel entry {v} outside (0, 1] for class `{class_label}`"
                )));
            }
        }
        Ok(KernelMatrixPair { class_label, n, k, l })
    }
}

/// Per-class and aggregate contamination scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CIScore {
    pub per_class: BTreeMap<String, f64>,
    pub aggregate: f64,
    /// Total members across classes (the weight normalizer M).
    pub total: usize,
}

/// Partition the evaluation set by class label.
///
/// Groups come back sorted by label; members keep input (manifest) order.
/// With `max_per_class > 0`, oversized groups keep a random subset of
/// that size, drawn by a shuffle seeded with `shuffle_seed`, and the kept
/// members are re-sorted into input order.
pub fn group_by_class(
    ids: &[String],
    classes: &[String],
    max_per_class: usize,
    shuffle_seed: u64,
) -> Result<Vec<ClassGroup>> {
    if ids.len() != classes.len() {
        return Err(Error::Internal(format!(
            "{} ids vs {} class labels",
            ids.len(),
            classes.len()
        )));
    }
    if ids.is_empty() {
        return Err(Error::Analysis("no utterances to group".into()));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, class) in classes.iter().enumerate() {
        by_class.entry(class).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let mut groups = Vec::with_capacity(by_class.len());
    for (class, mut indices) in by_class {
        if max_per_class > 0 && indices.len() > max_per_class {
            indices.shuffle(&mut rng);
            indices.truncate(max_per_class);
            indices.sort_unstable();
        }
        groups.push(ClassGroup {
            class_label: class.to_string(),
            member_ids: indices.iter().map(|&i| ids[i].clone()).collect(),
            indices,
        });
    }
    Ok(groups)
}

/// Z-score with the population standard deviation. A constant input maps
/// to all zeros; fewer than two values is an error.
pub fn standardize_values(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Analysis(format!(
            "standardization needs at least 2 values, got {}",
            values.len()
        )));
    }
    // The mean of n copies of x need not round back to x, so detect the
    // constant case directly instead of via sd == 0.
    if values.iter().all(|v| *v == values[0]) {
        return Ok(vec![0.0; values.len()]);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// Cosine similarity Gram matrix over flattened embeddings.
///
/// All embeddings must share one shape; a zero-norm embedding is an error
/// that names the offending utterance. The diagonal is exactly 1 and
/// off-diagonals are clamped into [-1, 1] against rounding spill.
pub fn cosine_kernel(embeddings: &[&FixedEmbedding]) -> Result<SquareMatrix> {
    let n = embeddings.len();
    if n == 0 {
        return Err(Error::Kernel("no embeddings".into()));
    }
    let (parts, cols) = (embeddings[0].parts, embeddings[0].cols);
    for e in embeddings {
        if (e.parts, e.cols) != (parts, cols) {
            return Err(Error::Kernel(format!(
                "embedding shape mismatch: `{}` is {}x{}, `{}` is {}x{}",
                embeddings[0].source_id, parts, cols, e.source_id, e.parts, e.cols
            )));
        }
    }
    let mut norms = Vec::with_capacity(n);
    for e in embeddings {
        let norm = e.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Kernel(format!(
                "embedding `{}` has degenerate norm {norm}",
                e.source_id
            )));
        }
        norms.push(norm);
    }

    let mut m = SquareMatrix::from_fn(n, |_, _| 0.0);
    for i in 0..n {
        m.set(i, i, 1.0);
        for j in 0..i {
            let dot: f64 =
                embeddings[i].data.iter().zip(&embeddings[j].data).map(|(a, b)| a * b).sum();
            let v = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(m)
}

/// Gaussian kernel on scalar values: `exp(-(z_i - z_j)^2 / (2 sigma^2))`.
///
/// The diagonal is exactly 1; off-diagonals are floored at the smallest
/// positive normal so entries stay strictly positive even when distances
/// are astronomically larger than `sigma`.
pub fn rbf_kernel(values: &[f64], sigma: f64) -> Result<SquareMatrix> {
    // NaN must fail this bound too, hence the explicit finiteness check.
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::Config(format!("rbf sigma must be > 0, got {sigma}")));
    }
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Kernel(format!("value {i} is not finite: {v}")));
        }
    }
    let n = values.len();
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut m = SquareMatrix::from_fn(n, |_, _| 0.0);
    for i in 0..n {
        m.set(i, i, 1.0);
        for j in 0..i {
            let d = values[i] - values[j];
            let v = (-d * d * inv).exp().max(f64::MIN_POSITIVE);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(m)
}

/// Biased HSIC estimate for one class.
///
/// Both matrices are row-centered (`A -> A H`) and the trace of the
/// four-factor product is taken as `sum_ij (K H)_ij (L H)_ji`, so nothing
/// bigger than n x n is ever materialized. A 1 x 1 input scores 0.
pub fn hsic_class(k: &SquareMatrix, l: &SquareMatrix) -> Result<f64> {
    if k.n != l.n {
        return Err(Error::Internal(format!(
            "hsic kernel sizes disagree: {}x{} vs {}x{}",
            k.n, k.n, l.n, l.n
        )));
    }
    let n = k.n;
    if n <= 1 {
        return Ok(0.0);
    }

    let kh = right_center(k);
    let lh = right_center(l);
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += kh.get(i, j) * lh.get(j, i);
        }
    }
    Ok(acc / (n * n) as f64)
}

/// `A -> A H`: subtract each row's mean from that row.
fn right_center(m: &SquareMatrix) -> SquareMatrix {
    let n = m.n;
    let mut out = m.clone();
    for i in 0..n {
        let row = &mut out.data[i * n..(i + 1) * n];
        let mean = row.iter().sum::<f64>() / n as f64;
        for v in row {
            *v -= mean;
        }
    }
    out
}

/// Member-weighted aggregate over per-class kernel pairs.
///
/// Every class counts toward M, including singletons (which score 0).
/// A per-class score below `-NEGATIVITY_TOLERANCE` trips an internal
/// error since PSD kernels cannot produce one.
pub fn ci_estimate(pairs: &[KernelMatrixPair]) -> Result<CIScore> {
    if pairs.is_empty() {
        return Err(Error::Analysis("no class groups to score".into()));
    }
    let mut per_class = BTreeMap::new();
    let mut weighted = 0.0;
    let mut total = 0usize;
    for pair in pairs {
        let h = hsic_class(&pair.k, &pair.l)?;
        if h < -NEGATIVITY_TOLERANCE {
            return Err(Error::Internal(format!(
                "negative dependence score {h} for class `{}`",
                pair.class_label
            )));
        }
        if per_class.insert(pair.class_label.clone(), h).is_some() {
            return Err(Error::Internal(format!(
                "duplicate class `{}` in kernel pairs",
                pair.class_label
            )));
        }
        weighted += h * pair.n as f64;
        total += pair.n;
    }
    Ok(CIScore { per_class, aggregate: weighted / total as f64, total })
}

/// Full scoring path for one pseudo-label over a grouped evaluation set:
/// optional global standardization, per-class kernels, weighted aggregate.
pub fn ci_for_label(
    groups: &[ClassGroup],
    embeddings: &[FixedEmbedding],
    values: &[f64],
    cfg: &RunConfig,
) -> Result<CIScore> {
    if embeddings.len() != values.len() {
        return Err(Error::Internal(format!(
            "{} embeddings vs {} values",
            embeddings.len(),
            values.len()
        )));
    }
    let standardized;
    let z: &[f64] = if cfg.standardize {
        standardized = standardize_values(values)?;
        &standardized
    } else {
        values
    };

    let pairs: Vec<KernelMatrixPair> = groups
        .par_iter()
        .map(|group| {
            let members: Vec<&FixedEmbedding> = group
                .indices
                .iter()
                .map(|&i| {
                    embeddings
                        .get(i)
                        .ok_or_else(|| Error::Internal(format!("group index {i} out of bounds")))
                })
                .collect::<Result<_>>()?;
            let member_values: Vec<f64> = group.indices.iter().map(|&i| z[i]).collect();
            let k = cosine_kernel(&members)?;
            let l = rbf_kernel(&member_values, cfg.rbf_sigma)?;
            KernelMatrixPair::new(group.class_label.clone(), k, l)
        })
        .collect::<Result<_>>()?;

    ci_estimate(&pairs)
}
