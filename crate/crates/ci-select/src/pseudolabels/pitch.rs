//! Lag-domain periodicity machinery shared by the f0/voicing and
//! harmonics-to-noise extractors.

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// Integer lag window corresponding to the configured pitch range.
#[derive(Debug, Clone, Copy)]
pub struct LagRange {
    /// Smallest searched lag (highest f0), in samples.
    pub min: usize,
    /// Largest searched lag (lowest f0), in samples.
    pub max: usize,
}

impl LagRange {
    /// Derive the lag window from the pitch range and check it fits the
    /// analysis frame.
    pub fn from_config(sample_rate: u32, cfg: &RunConfig) -> Result<LagRange> {
        let sr = sample_rate as f64;
        let min = (sr / cfg.f0_max).ceil() as usize;
        let max = (sr / cfg.f0_min).floor() as usize;
        if min < 4 {
            return Err(Error::Config(format!(
                "f0_max = {} Hz leaves a period of {min} samples at {sample_rate} Hz; need at least 4",
                cfg.f0_max
            )));
        }
        let (frame_len, _) = crate::dsp::frame_geometry(sample_rate, cfg)?;
        if max + 2 > frame_len {
            return Err(Error::Config(format!(
                "pitch search down to f0_min = {} Hz needs lags up to {max} samples, but frames \
                 hold only {frame_len}; increase frame_ms or raise f0_min",
                cfg.f0_min
            )));
        }
        if min >= max {
            return Err(Error::Config(format!(
                "empty pitch lag range [{min}, {max}] at {sample_rate} Hz"
            )));
        }
        Ok(LagRange { min, max })
    }
}

/// One frame's pitch estimate.
#[derive(Debug, Clone, Copy)]
pub struct PitchEstimate {
    /// Refined lag in samples (fractional after interpolation).
    pub lag: f64,
    /// 1 minus the normalized difference minimum, in [0, 1]; higher means
    /// more periodic.
    pub periodicity: f64,
}

/// Cumulative-mean-normalized difference search with parabolic refinement
/// of the winning lag.
pub fn cmnd_pitch(frame: &[f64], lags: &LagRange) -> PitchEstimate {
    let n = frame.len();
    debug_assert!(lags.max + 2 <= n);

    // Difference function over the lags we may touch (plus one each side
    // for interpolation), then cumulative-mean normalization. The per-lag
    // mean removes the shrinking in-frame overlap, which would otherwise
    // bias long lags low and make noise look periodic.
    let top = (lags.max + 1).min(n - 1);
    let mut dnorm = vec![1.0; top + 1];
    let mut cum = 0.0;
    for tau in 1..=top {
        let mut d = 0.0;
        for i in 0..n - tau {
            let diff = frame[i] - frame[i + tau];
            d += diff * diff;
        }
        let delta = d / (n - tau) as f64;
        cum += delta;
        dnorm[tau] = if cum > 0.0 { delta * tau as f64 / cum } else { 1.0 };
    }

    // First dip below the threshold wins, descending to its local
    // minimum; a pure argmin would drift to period multiples whenever a
    // later dip is fractionally deeper. Global argmin is the fallback
    // for frames that never dip (they score unvoiced anyway).
    const SEARCH_THRESHOLD: f64 = 0.5;
    let mut best = 0;
    for tau in lags.min..=lags.max {
        if dnorm[tau] < SEARCH_THRESHOLD {
            best = tau;
            while best < lags.max && dnorm[best + 1] < dnorm[best] {
                best += 1;
            }
            break;
        }
    }
    if best == 0 {
        best = lags.min;
        for tau in lags.min..=lags.max {
            if dnorm[tau] < dnorm[best] {
                best = tau;
            }
        }
    }

    let mut lag = best as f64;
    if best > lags.min && best < top {
        let (a, b, c) = (dnorm[best - 1], dnorm[best], dnorm[best + 1]);
        let denom = a - 2.0 * b + c;
        if denom > 0.0 {
            let delta = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            lag += delta;
        }
    }

    PitchEstimate { lag, periodicity: (1.0 - dnorm[best]).clamp(0.0, 1.0) }
}

/// Largest normalized autocorrelation over the lag window, in [-1, 1].
/// Silent frames (zero energy on either side of a lag) score 0.
pub fn autocorr_peak(frame: &[f64], lags: &LagRange) -> f64 {
    let n = frame.len();
    debug_assert!(lags.max + 2 <= n);
    let mut best = 0.0f64;
    for tau in lags.min..=lags.max {
        let overlap = n - tau;
        let mut num = 0.0;
        let mut e_head = 0.0;
        let mut e_tail = 0.0;
        for i in 0..overlap {
            num += frame[i] * frame[i + tau];
            e_head += frame[i] * frame[i];
            e_tail += frame[i + tau] * frame[i + tau];
        }
        let denom = (e_head * e_tail).sqrt();
        if denom > 0.0 {
            let r = num / denom;
            if r > best {
                best = r;
            }
        }
    }
    best.clamp(-1.0, 1.0)
}
