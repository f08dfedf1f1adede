//! Binary feature cache, one file per utterance.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic  "CIFE"          4 bytes
//! version u32 = 1        4 bytes
//! rows    u32 (L)        4 bytes
//! cols    u32 (D)        4 bytes
//! frame_hop_s  f64       8 bytes
//! frame_len_s  f64       8 bytes
//! data    L*D f32        row-major
//! ```
//!
//! Values are stored as f32; reading widens them back to f64, so a write
//! followed by a read is bit-exact whenever the in-memory values are f32
//! representable (which holds for anything that came out of a cache).
//! Writes go to a temp file in the same directory and are renamed into
//! place, so concurrent readers never observe a half-written cache.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::corpus::FeatureSequence;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CIFE";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8;

fn cache_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Cache { path: path.to_path_buf(), message: message.into() }
}

/// Serialize a feature sequence to `path` atomically.
pub fn cache_write(path: &Path, seq: &FeatureSequence) -> Result<()> {
    let rows = u32::try_from(seq.rows)
        .map_err(|_| cache_err(path, format!("row count {} exceeds u32", seq.rows)))?;
    let cols = u32::try_from(seq.cols)
        .map_err(|_| cache_err(path, format!("column count {} exceeds u32", seq.cols)))?;

    let mut out = Vec::with_capacity(HEADER_LEN + seq.data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&seq.frame_hop_s.to_le_bytes());
    out.extend_from_slice(&seq.frame_len_s.to_le_bytes());
    for &v in &seq.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }

    // Unique temp name per process and write, then atomic rename.
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let mut tmp_name =
        path.file_name().ok_or_else(|| cache_err(path, "path has no file name"))?.to_os_string();
    tmp_name.push(format!(".tmp.{}.{n}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);

    std::fs::write(&tmp, &out).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Read a cache file back into a [`FeatureSequence`].
///
/// The sequence's `source_id` is the cache file's stem. Bad magic, an
/// unknown version, or a byte count that disagrees with the header's
/// dimensions are data errors.
pub fn cache_read(path: &Path) -> Result<FeatureSequence> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(cache_err(path, format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(cache_err(path, "bad magic (not a feature cache)"));
    }
    let le32 = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let le64 = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = le32(4);
    if version != VERSION {
        return Err(cache_err(
            path,
            format!("version mismatch: file has {version}, expected {VERSION}"),
        ));
    }
    let rows = le32(8) as usize;
    let cols = le32(12) as usize;
    let frame_hop_s = le64(16);
    let frame_len_s = le64(24);
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| cache_err(path, "dimension overflow"))?;
    if payload.len() != expected {
        return Err(cache_err(
            path,
            format!(
                "header says {rows}x{cols} ({expected} bytes) but payload has {} bytes",
                payload.len()
            ),
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let source_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    FeatureSequence::new(source_id, rows, cols, data, frame_hop_s, frame_len_s)
}
