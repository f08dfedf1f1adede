//! Fixed-size utterance embeddings via Gaussian-weighted downsampling.
//!
//! A variable-length sequence of L frames becomes N rows; row k is a
//! convex combination of all frames with Gaussian weights centered at
//! `c_k = (k + 0.5) * L / N - 0.5` and width `sigma_gd * L` frames, so
//! every part sees the whole sequence but is dominated by its segment.

use crate::corpus::FeatureSequence;
use crate::error::{Error, Result};

/// An N-part embedding of one utterance, row-major N by D.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedEmbedding {
    pub source_id: String,
    /// Number of parts (rows).
    pub parts: usize,
    /// Feature dimension (columns), same as the input sequence.
    pub cols: usize,
    /// Row-major data, `parts * cols` values.
    pub data: Vec<f64>,
}

impl FixedEmbedding {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }
}

/// Normalized Gaussian weights of part `k` over `l` frames.
///
/// Distances are formed from the integer quantity
/// `(2i + 1) * n - (2k + 1) * l = 2n * (i - c_k)`, which is exact and
/// symmetric under simultaneous reversal of parts and frames.
pub fn part_weights(l: usize, n: usize, sigma_gd: f64, k: usize) -> Vec<f64> {
    let sigma_frames = sigma_gd * l as f64;
    // (i - c_k)^2 = delta^2 / (4 n^2)
    let denom = 8.0 * (n * n) as f64 * sigma_frames * sigma_frames;
    let mut weights: Vec<f64> = (0..l)
        .map(|i| {
            let delta = ((2 * i + 1) * n) as f64 - ((2 * k + 1) * l) as f64;
            (-(delta * delta) / denom).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Collapse an L x D sequence to an N x D embedding.
///
/// Each output row is anchored at its heaviest frame and accumulates
/// weighted differences from it, which makes a constant sequence map to
/// exactly constant rows.
pub fn gaussian_downsample(
    seq: &FeatureSequence,
    n_parts: usize,
    sigma_gd: f64,
) -> Result<FixedEmbedding> {
    if seq.rows == 0 {
        return Err(Error::Extractor(format!(
            "cannot embed `{}`: sequence has no frames",
            seq.source_id
        )));
    }
    if n_parts == 0 {
        return Err(Error::Config("n_parts must be >= 1".into()));
    }
    // NaN must fail this bound too, hence the explicit finiteness check.
    if !sigma_gd.is_finite() || sigma_gd <= 0.0 {
        return Err(Error::Config(format!("sigma_gd must be > 0, got {sigma_gd}")));
    }

    let (l, d) = (seq.rows, seq.cols);
    let mut data = vec![0.0; n_parts * d];
    for k in 0..n_parts {
        let weights = part_weights(l, n_parts, sigma_gd, k);
        let anchor =
            weights.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
        let anchor_row = seq.row(anchor);
        let out = &mut data[k * d..(k + 1) * d];
        out.copy_from_slice(anchor_row);
        for (i, &w) in weights.iter().enumerate() {
            if i == anchor {
                continue;
            }
            let row = seq.row(i);
            for (o, (&v, &a)) in out.iter_mut().zip(row.iter().zip(anchor_row)) {
                *o += w * (v - a);
            }
        }
    }

    Ok(FixedEmbedding { source_id: seq.source_id.clone(), parts: n_parts, cols: d, data })
}
