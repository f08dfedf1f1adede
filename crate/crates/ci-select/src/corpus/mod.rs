//! Corpus plumbing: manifests, audio buffers, segment slicing, and the
//! on-disk feature cache.
//!
//! A corpus is described by a CSV manifest with the header
//! `utterance_id,audio_path,class_label,start_s,end_s`. Empty `start_s`
//! and `end_s` mean the whole file; otherwise both must be present and
//! describe a segment in seconds. Relative audio paths are resolved
//! against the manifest's directory so corpora can be moved around.

mod cache;
mod wav;

pub use cache::{cache_read, cache_write};
pub use wav::{read_wav, write_wav_float32, write_wav_int16};

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One manifest row: an utterance (or a segment of a file) with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    /// Unique id within the manifest; also used as the cache file stem.
    pub utterance_id: String,
    /// Audio file location, already resolved against the manifest dir.
    pub audio_path: PathBuf,
    /// Grouping key for class-conditioned scoring; never empty.
    pub class_label: String,
    /// Segment start in seconds; `None` together with `end_s` = whole file.
    pub start_s: Option<f64>,
    /// Segment end in seconds (exclusive).
    pub end_s: Option<f64>,
}

/// Mono audio in memory, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// A variable-length sequence of feature frames (L rows by D columns,
/// row-major), together with the timing metadata needed downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    /// Utterance id this sequence was computed from.
    pub source_id: String,
    /// Number of frames (rows).
    pub rows: usize,
    /// Feature dimension per frame (columns).
    pub cols: usize,
    /// Row-major frame data, `rows * cols` values.
    pub data: Vec<f64>,
    /// Hop between consecutive frames, in seconds.
    pub frame_hop_s: f64,
    /// Length of each analysis frame, in seconds.
    pub frame_len_s: f64,
}

impl FeatureSequence {
    /// Build from parts, checking that the data length matches the shape.
    pub fn new(
        source_id: impl Into<String>,
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        frame_hop_s: f64,
        frame_len_s: f64,
    ) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Internal(format!(
                "feature shape {rows}x{cols} disagrees with {} values",
                data.len()
            )));
        }
        if cols == 0 {
            return Err(Error::Internal("feature dimension must be >= 1".into()));
        }
        Ok(FeatureSequence {
            source_id: source_id.into(),
            rows,
            cols,
            data,
            frame_hop_s,
            frame_len_s,
        })
    }

    /// Borrow frame `i` as a slice of length `cols`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Parse and validate a corpus manifest.
///
/// Rejects duplicate utterance ids, empty class labels, and segment bounds
/// that are negative, reversed, or half-specified.
pub fn load_manifest(path: &Path) -> Result<Vec<UtteranceRecord>> {
    let err = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        message: format!("row {line}: {message}"),
    };

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Manifest { path: path.to_path_buf(), message: e.to_string() })?;

    let expected = ["utterance_id", "audio_path", "class_label", "start_s", "end_s"];
    let headers = reader
        .headers()
        .map_err(|e| Error::Manifest { path: path.to_path_buf(), message: e.to_string() })?;
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            message: format!(
                "header must be `{}`, got `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| err(line, e.to_string()))?;
        if row.len() != expected.len() {
            return Err(err(
                line,
                format!("expected {} fields, got {}", expected.len(), row.len()),
            ));
        }
        let utterance_id = row[0].to_string();
        if utterance_id.is_empty() {
            return Err(err(line, "empty utterance_id".into()));
        }
        if utterance_id.contains(['/', '\\']) {
            return Err(err(
                line,
                format!("utterance_id `{utterance_id}` is not usable as a cache file name"),
            ));
        }
        if !seen.insert(utterance_id.clone()) {
            return Err(err(line, format!("duplicate utterance_id `{utterance_id}`")));
        }
        if row[1].is_empty() {
            return Err(err(line, "empty audio_path".into()));
        }
        let class_label = row[2].to_string();
        if class_label.is_empty() {
            return Err(err(line, "empty class_label".into()));
        }
        let parse_bound = |field: &str, name: &str| -> Result<Option<f64>> {
            if field.is_empty() {
                return Ok(None);
            }
            let v: f64 =
                field.parse().map_err(|_| err(line, format!("invalid {name} `{field}`")))?;
            if !v.is_finite() {
                return Err(err(line, format!("non-finite {name}")));
            }
            Ok(Some(v))
        };
        let start_s = parse_bound(&row[3], "start_s")?;
        let end_s = parse_bound(&row[4], "end_s")?;
        match (start_s, end_s) {
            (None, None) => {}
            (Some(s), Some(e)) => {
                if !(s >= 0.0 && s < e) {
                    return Err(err(
                        line,
                        format!("bounds must satisfy 0 <= start < end, got [{s}, {e})"),
                    ));
                }
            }
            _ => {
                return Err(err(
                    line,
                    "start_s and end_s must both be present or both be empty".into(),
                ));
            }
        }
        let audio_path = {
            let p = Path::new(&row[1]);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        records.push(UtteranceRecord { utterance_id, audio_path, class_label, start_s, end_s });
    }
    Ok(records)
}

/// Cut `[start_s, end_s)` out of a buffer.
///
/// Boundary samples are chosen by rounding `t * sample_rate` half away
/// from zero; the end index is exclusive. Bounds outside the buffer are
/// an error rather than being silently clipped.
pub fn slice_segment(buf: &AudioBuffer, start_s: f64, end_s: f64) -> Result<AudioBuffer> {
    if !(start_s >= 0.0 && start_s < end_s) {
        return Err(Error::Audio(format!(
            "bounds must satisfy 0 <= start < end, got [{start_s}, {end_s})"
        )));
    }
    let sr = buf.sample_rate as f64;
    let start = (start_s * sr).round() as usize;
    let end = (end_s * sr).round() as usize;
    if end > buf.samples.len() {
        return Err(Error::Audio(format!(
            "segment end {end_s:.6}s (sample {end}) past buffer of {} samples",
            buf.samples.len()
        )));
    }
    if start >= end {
        return Err(Error::Audio(format!(
            "segment [{start_s:.6}, {end_s:.6})s rounds to an empty sample range"
        )));
    }
    Ok(AudioBuffer { samples: buf.samples[start..end].to_vec(), sample_rate: buf.sample_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_manifest(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("manifest.csv");
        fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn manifest_happy_path_and_relative_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest(
            dir.path(),
            "utterance_id,audio_path,class_label,start_s,end_s\n\
             utt-1,audio/a.wav,sil,,\n\
             utt-2,/abs/b.wav,aa,0.5,1.25\n",
        );
        let records = load_manifest(&path).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].audio_path, dir.path().join("audio/a.wav"));
        assert_eq!(records[0].start_s, None);
        assert_eq!(records[1].audio_path, Path::new("/abs/b.wav"));
        assert_eq!(records[1].start_s, Some(0.5));
        assert_eq!(records[1].end_s, Some(1.25));
    }

    #[test]
    fn manifest_rejects_duplicates_and_bad_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let dup = write_manifest(
            dir.path(),
            "utterance_id,audio_path,class_label,start_s,end_s\n\
             u,a.wav,x,,\n\
             u,b.wav,y,,\n",
        );
        let e = load_manifest(&dup).unwrap_err();
        assert!(e.to_string().contains("duplicate"), "{e}");
        assert_eq!(e.exit_code(), 2);

        for bad in [
            "u,a.wav,x,1.0,0.5",  // reversed
            "u,a.wav,x,-0.1,0.5", // negative
            "u,a.wav,x,0.1,",     // half-specified
            "u,a.wav,,0.1,0.5",   // empty class
        ] {
            let path = write_manifest(
                dir.path(),
                &format!("utterance_id,audio_path,class_label,start_s,end_s\n{bad}\n"),
            );
            assert!(load_manifest(&path).is_err(), "accepted: {bad}");
        }
    }

    #[test]
    fn manifest_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest(dir.path(), "id,path,label,s,e\nu,a.wav,x,,\n");
        let e = load_manifest(&path).unwrap_err();
        assert!(e.to_string().contains("header"), "{e}");
    }

    #[test]
    fn slice_rounds_half_away_from_zero() {
        let buf =
            AudioBuffer { samples: (0..100).map(|i| i as f32 / 100.0).collect(), sample_rate: 10 };
        // 0.05 s * 10 Hz = 0.5 -> sample 1; 9.95 s would overflow, use 5.25 -> 52.5 -> 53.
        let cut = slice_segment(&buf, 0.05, 5.25).unwrap();
        assert_eq!(cut.samples.len(), 53 - 1);
        assert_eq!(cut.samples[0], buf.samples[1]);
        assert_eq!(*cut.samples.last().unwrap(), buf.samples[52]);
    }

    #[test]
    fn slice_rejects_out_of_range() {
        let buf = AudioBuffer { samples: vec![0.0; 100], sample_rate: 10 };
        assert!(slice_segment(&buf, 0.0, 10.1).is_err());
        assert!(slice_segment(&buf, 2.0, 1.0).is_err());
        assert!(slice_segment(&buf, -1.0, 1.0).is_err());
        // Degenerate after rounding: both bounds hit the same sample.
        assert!(slice_segment(&buf, 0.5, 0.52).is_err());
    }

    #[test]
    fn feature_sequence_shape_checked() {
        assert!(FeatureSequence::new("u", 2, 3, vec![0.0; 6], 0.01, 0.025).is_ok());
        assert!(FeatureSequence::new("u", 2, 3, vec![0.0; 5], 0.01, 0.025).is_err());
        assert!(FeatureSequence::new("u", 0, 0, vec![], 0.01, 0.025).is_err());
    }
}
