//! Minimal RIFF/WAVE reader and writer for the two layouts the corpora
//! actually use: mono 16-bit PCM and mono 32-bit IEEE float.

use std::io::Write;
use std::path::Path;

use crate::corpus::AudioBuffer;
use crate::error::{Error, Result};

const FMT_PCM: u16 = 1;
const FMT_IEEE_FLOAT: u16 = 3;

fn wav_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Wav { path: path.to_path_buf(), message: message.into() }
}

/// Read a mono WAV file into an [`AudioBuffer`].
///
/// 16-bit PCM samples are scaled by 1/32768; 32-bit float samples are
/// taken as-is and must already lie in [-1, 1]. Anything else (stereo,
/// other encodings, truncated chunks) is a data error that names the
/// offending property.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(wav_err(path, "not a RIFF/WAVE file"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(wav_err(
                path,
                format!("truncated `{}` chunk", String::from_utf8_lossy(id)),
            ));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(wav_err(path, "fmt chunk shorter than 16 bytes"));
                }
                let le16 = |o: usize| u16::from_le_bytes(body[o..o + 2].try_into().unwrap());
                let le32 = |o: usize| u32::from_le_bytes(body[o..o + 4].try_into().unwrap());
                fmt = Some((le16(0), le16(2), le32(4), le16(14)));
            }
            b"data" => data = Some(body),
            _ => {} // skip fact, LIST, etc.
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        pos = body_end + (size & 1);
    }

    let (format, channels, sample_rate, bits) =
        fmt.ok_or_else(|| wav_err(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| wav_err(path, "missing data chunk"))?;
    if channels != 1 {
        return Err(wav_err(path, format!("mono required, file has {channels} channels")));
    }
    if sample_rate == 0 {
        return Err(wav_err(path, "sample rate is zero"));
    }

    let samples = match (format, bits) {
        (FMT_PCM, 16) => {
            if data.len() % 2 != 0 {
                return Err(wav_err(path, "data chunk is not a whole number of 16-bit samples"));
            }
            data.chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
                .collect::<Vec<f32>>()
        }
        (FMT_IEEE_FLOAT, 32) => {
            if data.len() % 4 != 0 {
                return Err(wav_err(path, "data chunk is not a whole number of 32-bit samples"));
            }
            let samples: Vec<f32> = data
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            for (i, &s) in samples.iter().enumerate() {
                if !s.is_finite() || s.abs() > 1.0 {
                    return Err(wav_err(path, format!("float sample {i} out of [-1, 1]: {s}")));
                }
            }
            samples
        }
        (f, b) => {
            return Err(wav_err(
                path,
                format!("unsupported encoding: audio_format={f}, bits_per_sample={b} (need PCM16 or float32)"),
            ))
        }
    };
    if samples.is_empty() {
        return Err(wav_err(path, "empty data chunk"));
    }
    Ok(AudioBuffer { samples, sample_rate })
}

fn write_header(out: &mut Vec<u8>, format: u16, sample_rate: u32, bits: u16, data_len: u32) {
    let block_align = (bits / 8) as u32;
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * block_align).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
}

/// Write mono 16-bit PCM. Samples are clamped to [-1, 1] and quantized
/// by rounding `x * 32768` (so a read-back differs by at most 1/32768).
pub fn write_wav_int16(path: &Path, samples: &[f32], sample_rate: u32) -> Result<()> {
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    write_header(&mut out, FMT_PCM, sample_rate, 16, (samples.len() * 2) as u32);
    for &s in samples {
        let q = (f64::from(s.clamp(-1.0, 1.0)) * 32768.0).round();
        let q = q.clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Write mono 32-bit IEEE float. Read-back is bit-exact.
pub fn write_wav_float32(path: &Path, samples: &[f32], sample_rate: u32) -> Result<()> {
    let mut out = Vec::with_capacity(44 + samples.len() * 4);
    write_header(&mut out, FMT_IEEE_FLOAT, sample_rate, 32, (samples.len() * 4) as u32);
    for &s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}
