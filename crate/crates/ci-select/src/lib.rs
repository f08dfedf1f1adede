//! Rank candidate pseudo-labels for speech self-supervision by how much
//! class-discriminative information they leak.
//!
//! The pipeline turns a corpus of labelled utterances into per-utterance
//! scalar pseudo-labels (loudness, pitch, voicing, spectral tilt, ...),
//! compresses each utterance's log-mel features into a fixed-size
//! embedding, and measures the dependence between embeddings and each
//! pseudo-label inside every class with a kernel statistic (HSIC). The
//! per-class scores are combined into a single contamination index (CI)
//! per pseudo-label: high CI means the pseudo-label carries class
//! information and is a poor self-supervision target.
//!
//! Entry points:
//!
//! - [`pipeline`] exposes the four commands behind the `ci-select`
//!   binary: `extract`, `ci`, `correlate`, and `synth-bench`.
//! - The lower layers are usable on their own: [`dsp`] for framing and
//!   log-mel features, [`pseudolabels`] for the scalar extractors,
//!   [`embed`] for Gaussian downsampling, [`hsic`] for kernels and the
//!   CI estimator, [`analysis`] for ranking, rank correlations, and the
//!   synthetic benchmark.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! - `gaussian_downsampling` squeezes a variable-length sequence into
//!   fixed parts and shows the weight profiles.
//! - `pseudo_labels` extracts all seven pseudo-labels from synthesized
//!   audio and prints the framewise and utterance values.
//! - `hsic_estimate` computes HSIC on toy data and compares dependent
//!   against independent pairings.
//! - `extract_and_rank` builds a small corpus on the fly and runs the
//!   full extract + ci pipeline on it.
//! - `correlate_errors` ranks scores against downstream error rates.
//! - `synth_benchmark` runs the synthetic separation check.

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod dsp;
pub mod embed;
mod error;
pub mod hsic;
pub mod pipeline;
pub mod pseudolabels;

pub use config::RunConfig;
pub use error::{Error, Result};
