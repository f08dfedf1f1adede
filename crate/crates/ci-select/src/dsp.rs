//! Spectral front end: framed power spectra and log-mel features.
//!
//! Framing uses a periodic Hann window; the frame count for a signal of
//! `S` samples is `floor((S - frame_len) / hop) + 1`, so a signal shorter
//! than one frame is an error. Power spectra keep bins `0..=fft_size/2`.
//! Mel filters are triangles on the HTK mel scale
//! (`m = 2595 * log10(1 + f/700)`), area-normalized, applied to linear
//! power, followed by `ln(x + 1e-10)`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::config::RunConfig;
use crate::corpus::{AudioBuffer, FeatureSequence};
use crate::error::{Error, Result};

/// Additive floor under linear mel power before the log.
pub const LOG_FLOOR: f64 = 1e-10;

/// Framed one-sided power spectra (L rows by `fft_size/2 + 1` bins).
#[derive(Debug, Clone)]
pub struct SpectralFrameSet {
    pub source_id: String,
    /// Number of frames.
    pub frames: usize,
    /// Bins per frame, `fft_size / 2 + 1`.
    pub bins: usize,
    /// Row-major power values, `frames * bins`.
    pub power: Vec<f64>,
    pub sample_rate: u32,
    pub fft_size: usize,
    /// Frame length in samples.
    pub frame_len: usize,
    /// Hop in samples.
    pub hop: usize,
}

impl SpectralFrameSet {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.power[i * self.bins..(i + 1) * self.bins]
    }

    /// Center frequency of DFT bin `b` in Hz.
    pub fn bin_hz(&self, b: usize) -> f64 {
        b as f64 * self.sample_rate as f64 / self.fft_size as f64
    }
}

/// Frame geometry in samples for a given rate and config.
pub fn frame_geometry(sample_rate: u32, cfg: &RunConfig) -> Result<(usize, usize)> {
    let sr = sample_rate as f64;
    let frame_len = (cfg.frame_ms * sr / 1000.0).round() as usize;
    let hop = (cfg.hop_ms * sr / 1000.0).round() as usize;
    if frame_len < 2 {
        return Err(Error::Dsp(format!(
            "frame_ms = {} at {} Hz gives a frame of {} samples",
            cfg.frame_ms, sample_rate, frame_len
        )));
    }
    if hop == 0 {
        return Err(Error::Dsp(format!(
            "hop_ms = {} at {} Hz rounds to zero samples",
            cfg.hop_ms, sample_rate
        )));
    }
    Ok((frame_len, hop))
}

/// Number of full frames in a signal of `n_samples`, or an error if the
/// signal is shorter than one frame.
pub fn frame_count(n_samples: usize, frame_len: usize, hop: usize) -> Result<usize> {
    if n_samples < frame_len {
        return Err(Error::Dsp(format!(
            "signal of {n_samples} samples is shorter than one frame ({frame_len} samples)"
        )));
    }
    Ok((n_samples - frame_len) / hop + 1)
}

/// Periodic Hann window of length `n`.
fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

/// Compute framed one-sided power spectra.
///
/// `fft_size = 0` in the config picks the next power of two at or above
/// the frame length. Optional pre-emphasis (`y[n] = x[n] - a*x[n-1]`) is
/// applied to the whole signal before framing when `a > 0`.
pub fn stft_power(buf: &AudioBuffer, cfg: &RunConfig, source_id: &str) -> Result<SpectralFrameSet> {
    let (frame_len, hop) = frame_geometry(buf.sample_rate, cfg)?;
    let fft_size = if cfg.fft_size == 0 { frame_len.next_power_of_two() } else { cfg.fft_size };
    if fft_size < frame_len {
        return Err(Error::Config(format!(
            "fft_size {fft_size} is smaller than the frame length of {frame_len} samples"
        )));
    }

    let mut signal: Vec<f64> = buf.samples.iter().map(|&s| s as f64).collect();
    if cfg.preemphasis > 0.0 {
        for i in (1..signal.len()).rev() {
            signal[i] -= cfg.preemphasis * signal[i - 1];
        }
    }

    let frames = frame_count(signal.len(), frame_len, hop)?;
    let window = hann_periodic(frame_len);
    let bins = fft_size / 2 + 1;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut buffer = vec![Complex::default(); fft_size];
    let mut power = Vec::with_capacity(frames * bins);
    for t in 0..frames {
        let start = t * hop;
        for i in 0..frame_len {
            buffer[i] = Complex::new(signal[start + i] * window[i], 0.0);
        }
        for slot in buffer.iter_mut().skip(frame_len) {
            *slot = Complex::default();
        }
        fft.process_with_scratch(&mut buffer, &mut scratch);
        power.extend(buffer[..bins].iter().map(|c| c.re * c.re + c.im * c.im));
    }

    Ok(SpectralFrameSet {
        source_id: source_id.to_string(),
        frames,
        bins,
        power,
        sample_rate: buf.sample_rate,
        fft_size,
        frame_len,
        hop,
    })
}

/// Dense triangular filterbank, `n_mels` rows by `bins` columns.
///
/// Each row is non-negative, scaled by `2 / (hi - lo)` so filters of
/// different widths contribute comparable mass, and must cover at least
/// one DFT bin; otherwise the band index is reported in the error.
pub fn mel_filterbank(
    n_mels: usize,
    bins: usize,
    sample_rate: u32,
    fft_size: usize,
    fmin: f64,
    fmax: f64,
) -> Result<Vec<f64>> {
    let nyquist = sample_rate as f64 / 2.0;
    let fmax = if fmax == 0.0 { nyquist } else { fmax };
    if fmax > nyquist + 1e-9 {
        return Err(Error::Config(format!(
            "fmax {fmax} Hz exceeds the Nyquist frequency {nyquist} Hz"
        )));
    }
    if fmin >= fmax {
        return Err(Error::Config(format!("fmin {fmin} must be below fmax {fmax}")));
    }

    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let hz_per_bin = sample_rate as f64 / fft_size as f64;
    let mut fb = vec![0.0; n_mels * bins];
    for k in 0..n_mels {
        let (lo, center, hi) = (edges[k], edges[k + 1], edges[k + 2]);
        let scale = 2.0 / (hi - lo);
        let mut any = false;
        for b in 0..bins {
            let f = b as f64 * hz_per_bin;
            let w = if f <= lo || f >= hi {
                0.0
            } else if f <= center {
                (f - lo) / (center - lo)
            } else {
                (hi - f) / (hi - center)
            };
            if w > 0.0 {
                fb[k * bins + b] = w * scale;
                any = true;
            }
        }
        if !any {
            return Err(Error::Config(format!(
                "mel filter {k} (centered at {center:.1} Hz) covers no DFT bin; \
                 reduce n_mels or increase fft_size"
            )));
        }
    }
    Ok(fb)
}

/// Apply the mel filterbank and log-compress: `ln(mel_power + 1e-10)`.
pub fn mel_spectrogram(spec: &SpectralFrameSet, cfg: &RunConfig) -> Result<FeatureSequence> {
    let n_mels = cfg.n_mels;
    let fb =
        mel_filterbank(n_mels, spec.bins, spec.sample_rate, spec.fft_size, cfg.fmin, cfg.fmax)?;

    let mut data = Vec::with_capacity(spec.frames * n_mels);
    for t in 0..spec.frames {
        let row = spec.row(t);
        for k in 0..n_mels {
            let filter = &fb[k * spec.bins..(k + 1) * spec.bins];
            let mut acc = 0.0;
            for (w, p) in filter.iter().zip(row) {
                if *w > 0.0 {
                    acc += w * p;
                }
            }
            data.push((acc + LOG_FLOOR).ln());
        }
    }

    let sr = spec.sample_rate as f64;
    FeatureSequence::new(
        spec.source_id.clone(),
        spec.frames,
        n_mels,
        data,
        spec.hop as f64 / sr,
        spec.frame_len as f64 / sr,
    )
}

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}
