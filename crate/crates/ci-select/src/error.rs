//! Crate-wide error type and process exit-code mapping.

use std::path::PathBuf;

/// Everything that can go wrong across the pipeline.
///
/// Variants are grouped by how the CLI reports them: configuration and
/// usage problems exit with code 1, bad or missing input data with code 2,
/// and violated internal invariants with code 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration file, unknown key, or out-of-range value.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed manifest row or duplicate utterance id.
    #[error("manifest error in {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    /// Unreadable or unsupported WAV payload.
    #[error("wav error in {path}: {message}")]
    Wav { path: PathBuf, message: String },

    /// Segment bounds or sample data outside the valid range.
    #[error("audio error: {0}")]
    Audio(String),

    /// Corrupt, truncated, or incompatible feature-cache file.
    #[error("cache error in {path}: {message}")]
    Cache { path: PathBuf, message: String },

    /// Signal too short, degenerate filterbank, or similar front-end failure.
    #[error("dsp error: {0}")]
    Dsp(String),

    /// Pseudo-label extraction failure.
    #[error("extractor error: {0}")]
    Extractor(String),

    /// Degenerate kernel input, e.g. a zero-norm embedding.
    #[error("kernel error: {0}")]
    Kernel(String),

    /// Ranking or correlation failure (length mismatch, constant input, ...).
    #[error("analysis error: {0}")]
    Analysis(String),

    /// Filesystem failure with the offending path attached.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Broken internal invariant; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 internal.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 1,
            Error::Internal(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
