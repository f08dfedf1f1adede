//! Framewise pseudo-label descriptors and their utterance aggregates.
//!
//! Seven descriptors are supported: loudness, f0, voicing, alpha_ratio,
//! zcr, rasta_l1, and log_hnr. Each extractor produces a framewise series
//! plus one utterance-level value; most aggregate by plain mean, f0
//! averages voiced frames only, and rasta_l1 drops the first four frames
//! to let its filter settle.

mod pitch;

use std::fmt;
use std::str::FromStr;

use crate::config::RunConfig;
use crate::corpus::{AudioBuffer, FeatureSequence};
use crate::dsp::SpectralFrameSet;
use crate::error::{Error, Result};

/// The supported pseudo-label descriptors, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PseudoLabel {
    Loudness,
    F0,
    Voicing,
    AlphaRatio,
    Zcr,
    RastaL1,
    LogHnr,
}

impl PseudoLabel {
    pub const ALL: [PseudoLabel; 7] = [
        PseudoLabel::Loudness,
        PseudoLabel::F0,
        PseudoLabel::Voicing,
        PseudoLabel::AlphaRatio,
        PseudoLabel::Zcr,
        PseudoLabel::RastaL1,
        PseudoLabel::LogHnr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PseudoLabel::Loudness => "loudness",
            PseudoLabel::F0 => "f0",
            PseudoLabel::Voicing => "voicing",
            PseudoLabel::AlphaRatio => "alpha_ratio",
            PseudoLabel::Zcr => "zcr",
            PseudoLabel::RastaL1 => "rasta_l1",
            PseudoLabel::LogHnr => "log_hnr",
        }
    }
}

impl fmt::Display for PseudoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PseudoLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PseudoLabel::ALL.into_iter().find(|l| l.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = PseudoLabel::ALL.iter().map(|l| l.name()).collect();
            Error::Config(format!("unknown pseudo-label `{s}`; valid names: {}", valid.join(", ")))
        })
    }
}

/// A framewise descriptor series with its utterance-level aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelSeries {
    pub label: PseudoLabel,
    pub framewise: Vec<f64>,
    pub utterance_value: f64,
}

impl PseudoLabelSeries {
    fn build(label: PseudoLabel, framewise: Vec<f64>) -> Result<Self> {
        let utterance_value = aggregate_utterance(label, &framewise)?;
        Ok(PseudoLabelSeries { label, framewise, utterance_value })
    }
}

/// Collapse a framewise series to one value per utterance.
///
/// f0 averages voiced (nonzero) frames and is 0 when nothing is voiced;
/// rasta_l1 skips its four-frame filter transient; everything else is an
/// arithmetic mean. An empty series is an error.
pub fn aggregate_utterance(label: PseudoLabel, framewise: &[f64]) -> Result<f64> {
    if framewise.is_empty() {
        return Err(Error::Extractor(format!("empty framewise series for {label}")));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    match label {
        PseudoLabel::F0 => {
            let voiced: Vec<f64> = framewise.iter().copied().filter(|&v| v != 0.0).collect();
            if voiced.is_empty() {
                Ok(0.0)
            } else {
                Ok(mean(&voiced))
            }
        }
        PseudoLabel::RastaL1 => {
            if framewise.len() <= RASTA_TRANSIENT {
                return Err(Error::Extractor(format!(
                    "rasta_l1 needs more than {RASTA_TRANSIENT} frames, got {}",
                    framewise.len()
                )));
            }
            Ok(mean(&framewise[RASTA_TRANSIENT..]))
        }
        _ => Ok(mean(framewise)),
    }
}

/// Frames the filter needs before its output is meaningful.
const RASTA_TRANSIENT: usize = 4;

fn require_frames(rows: usize, what: &str) -> Result<()> {
    if rows == 0 {
        Err(Error::Extractor(format!("{what}: no frames")))
    } else {
        Ok(())
    }
}

/// Perceptual energy: per frame, sum over mel bands of the linear mel
/// power raised to 0.3.
pub fn extract_loudness(mel: &FeatureSequence) -> Result<PseudoLabelSeries> {
    require_frames(mel.rows, "loudness")?;
    let framewise =
        (0..mel.rows).map(|t| mel.row(t).iter().map(|&v| (0.3 * v).exp()).sum()).collect();
    PseudoLabelSeries::build(PseudoLabel::Loudness, framewise)
}

/// Pitch and voicing from a cumulative-mean-normalized difference search.
///
/// Returns the f0 series (Hz on voiced frames, 0 elsewhere) and the
/// binary voicing series. A frame is voiced when its periodicity score
/// reaches `cfg.voicing_threshold`.
pub fn extract_f0(
    buf: &AudioBuffer,
    cfg: &RunConfig,
) -> Result<(PseudoLabelSeries, PseudoLabelSeries)> {
    let lags = pitch::LagRange::from_config(buf.sample_rate, cfg)?;
    let mut f0 = Vec::new();
    let mut voicing = Vec::new();
    for frame in frames_f64(buf, cfg)? {
        let est = pitch::cmnd_pitch(&frame, &lags);
        if est.periodicity >= cfg.voicing_threshold {
            f0.push(buf.sample_rate as f64 / est.lag);
            voicing.push(1.0);
        } else {
            f0.push(0.0);
            voicing.push(0.0);
        }
    }
    Ok((
        PseudoLabelSeries::build(PseudoLabel::F0, f0)?,
        PseudoLabelSeries::build(PseudoLabel::Voicing, voicing)?,
    ))
}

/// Spectral balance: `10 log10(P_high / P_low)` with the low band covering
/// 50 Hz..=`alpha_split_hz` and the high band everything above it. Both
/// band powers are floored at 1e-10 and the result is clamped to
/// +-`alpha_clamp_db`.
pub fn extract_alpha_ratio(spec: &SpectralFrameSet, cfg: &RunConfig) -> Result<PseudoLabelSeries> {
    require_frames(spec.frames, "alpha_ratio")?;
    let split = cfg.alpha_split_hz;
    let clamp = cfg.alpha_clamp_db;
    const BAND_FLOOR: f64 = 1e-10;
    let framewise = (0..spec.frames)
        .map(|t| {
            let row = spec.row(t);
            let (mut low, mut high) = (0.0, 0.0);
            for (b, &p) in row.iter().enumerate() {
                let f = spec.bin_hz(b);
                if f >= 50.0 && f <= split {
                    low += p;
                } else if f > split {
                    high += p;
                }
            }
            let ratio = 10.0 * ((high + BAND_FLOOR) / (low + BAND_FLOOR)).log10();
            ratio.clamp(-clamp, clamp)
        })
        .collect();
    PseudoLabelSeries::build(PseudoLabel::AlphaRatio, framewise)
}

/// Zero-crossing rate: sign changes per frame divided by the frame length
/// in samples. Zero samples count as positive.
pub fn extract_zcr(buf: &AudioBuffer, cfg: &RunConfig) -> Result<PseudoLabelSeries> {
    let framewise = frames_f64(buf, cfg)?
        .map(|frame| {
            let changes = frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
            changes as f64 / frame.len() as f64
        })
        .collect();
    PseudoLabelSeries::build(PseudoLabel::Zcr, framewise)
}

/// Band-temporal modulation energy: each mel band is passed through the
/// IIR/FIR filter `y[t] = 0.98 y[t-1] + 0.1 (2 x[t] + x[t-1] - x[t-3] - 2 x[t-4])`
/// and the framewise value is the sum of |y| over bands. Needs at least
/// five frames so one frame survives the transient.
pub fn extract_rasta_l1(mel: &FeatureSequence) -> Result<PseudoLabelSeries> {
    if mel.rows <= RASTA_TRANSIENT {
        return Err(Error::Extractor(format!(
            "rasta_l1 needs more than {RASTA_TRANSIENT} frames, got {}",
            mel.rows
        )));
    }
    let mut framewise = vec![0.0; mel.rows];
    let mut band = vec![0.0; mel.rows];
    for d in 0..mel.cols {
        for (t, slot) in band.iter_mut().enumerate() {
            *slot = mel.data[t * mel.cols + d];
        }
        let filtered = rasta_filter(&band);
        for (t, y) in filtered.iter().enumerate() {
            framewise[t] += y.abs();
        }
    }
    PseudoLabelSeries::build(PseudoLabel::RastaL1, framewise)
}

/// The band-temporal filter on one band's trajectory. Samples before the
/// start and the initial filter state are zero.
fn rasta_filter(x: &[f64]) -> Vec<f64> {
    let at = |i: isize| if i < 0 { 0.0 } else { x[i as usize] };
    let mut y = Vec::with_capacity(x.len());
    let mut prev = 0.0;
    for t in 0..x.len() as isize {
        let num = 2.0 * at(t) + at(t - 1) - at(t - 3) - 2.0 * at(t - 4);
        let v = 0.98 * prev + 0.1 * num;
        y.push(v);
        prev = v;
    }
    y
}

/// Log harmonics-to-noise ratio: `10 log10(r / (1 - r))` where `r` is the
/// largest normalized autocorrelation in the pitch lag range, clamped to
/// `[cfg.hnr_min_db, cfg.hnr_max_db]`; `r <= 0` maps to the lower clamp.
pub fn extract_log_hnr(buf: &AudioBuffer, cfg: &RunConfig) -> Result<PseudoLabelSeries> {
    let lags = pitch::LagRange::from_config(buf.sample_rate, cfg)?;
    let framewise = frames_f64(buf, cfg)?
        .map(|frame| {
            let r = pitch::autocorr_peak(&frame, &lags);
            hnr_db(r, cfg.hnr_min_db, cfg.hnr_max_db)
        })
        .collect();
    PseudoLabelSeries::build(PseudoLabel::LogHnr, framewise)
}

/// Map a correlation peak to clamped dB.
pub fn hnr_db(r: f64, min_db: f64, max_db: f64) -> f64 {
    if r <= 0.0 {
        return min_db;
    }
    let db = 10.0 * (r / (1.0 - r)).log10();
    db.clamp(min_db, max_db)
}

/// Run all seven extractors over one utterance, in canonical order.
pub fn extract_all(
    buf: &AudioBuffer,
    spec: &SpectralFrameSet,
    mel: &FeatureSequence,
    cfg: &RunConfig,
) -> Result<Vec<PseudoLabelSeries>> {
    let (f0, voicing) = extract_f0(buf, cfg)?;
    Ok(vec![
        extract_loudness(mel)?,
        f0,
        voicing,
        extract_alpha_ratio(spec, cfg)?,
        extract_zcr(buf, cfg)?,
        extract_rasta_l1(mel)?,
        extract_log_hnr(buf, cfg)?,
    ])
}

/// Iterate raw-audio analysis frames as f64 vectors, using the same
/// geometry as the spectral front end.
fn frames_f64<'a>(
    buf: &'a AudioBuffer,
    cfg: &RunConfig,
) -> Result<impl Iterator<Item = Vec<f64>> + 'a> {
    let (frame_len, hop) = crate::dsp::frame_geometry(buf.sample_rate, cfg)?;
    let frames = crate::dsp::frame_count(buf.samples.len(), frame_len, hop)?;
    Ok((0..frames).map(move |t| {
        buf.samples[t * hop..t * hop + frame_len].iter().map(|&s| s as f64).collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{mel_spectrogram, stft_power, LOG_FLOOR};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn tone(seconds: f64, hz: f64, sr: u32, amp: f32) -> AudioBuffer {
        let n = (seconds * sr as f64).round() as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * hz * i as f64 / sr as f64).sin() as f32)
            .collect();
        AudioBuffer { samples, sample_rate: sr }
    }

    fn noise(seconds: f64, sr: u32, amp: f32, seed: u64) -> AudioBuffer {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = (seconds * sr as f64).round() as usize;
        let samples = (0..n).map(|_| rng.gen_range(-amp..amp)).collect();
        AudioBuffer { samples, sample_rate: sr }
    }

    fn mel_of(buf: &AudioBuffer, cfg: &RunConfig) -> FeatureSequence {
        mel_spectrogram(&stft_power(buf, cfg, "t").unwrap(), cfg).unwrap()
    }

    #[test]
    fn label_names_round_trip_and_unknown_listed() {
        for label in PseudoLabel::ALL {
            assert_eq!(label.name().parse::<PseudoLabel>().unwrap(), label);
        }
        let err = "pitch".parse::<PseudoLabel>().unwrap_err().to_string();
        assert!(err.contains("rasta_l1") && err.contains("log_hnr"), "{err}");
    }

    #[test]
    fn loudness_floor_and_unit_band() {
        // All-floor mel frame: value is n_mels * (1e-10)^0.3.
        let floor_frame = vec![LOG_FLOOR.ln(); 80];
        let mel = FeatureSequence::new("t", 1, 80, floor_frame, 0.01, 0.025).unwrap();
        let series = extract_loudness(&mel).unwrap();
        assert_abs_diff_eq!(series.framewise[0], 80.0 * 1e-3, epsilon = 1e-12);

        // One band at linear power 1, the rest at the floor.
        let mut frame = vec![LOG_FLOOR.ln(); 80];
        frame[10] = (1.0f64 + LOG_FLOOR).ln();
        let mel = FeatureSequence::new("t", 1, 80, frame, 0.01, 0.025).unwrap();
        let series = extract_loudness(&mel).unwrap();
        assert_abs_diff_eq!(series.framewise[0], 1.0 + 79.0 * 1e-3, epsilon = 1e-9);
    }

    #[test]
    fn loudness_scales_with_amplitude_to_the_0_6() {
        let cfg = RunConfig::default();
        let quiet = tone(0.4, 330.0, 16_000, 0.25);
        let loud = AudioBuffer {
            samples: quiet.samples.iter().map(|&s| s * 2.0).collect(),
            sample_rate: 16_000,
        };
        let a = extract_loudness(&mel_of(&quiet, &cfg)).unwrap().utterance_value;
        let b = extract_loudness(&mel_of(&loud, &cfg)).unwrap().utterance_value;
        // Power scales by 4, so each band term scales by 4^0.3 = 2^0.6,
        // up to the floor contribution of the empty bands.
        let expected = 2.0f64.powf(0.6);
        assert!((b / a - expected).abs() < 0.05, "ratio {} vs {expected}", b / a);
    }

    #[test]
    fn f0_of_220hz_tone_within_5hz_and_fully_voiced() {
        let cfg = RunConfig::default();
        let buf = tone(0.5, 220.0, 16_000, 0.7);
        let (f0, voicing) = extract_f0(&buf, &cfg).unwrap();
        assert!((f0.utterance_value - 220.0).abs() < 5.0, "mean f0 = {}", f0.utterance_value);
        assert!(voicing.utterance_value >= 0.9, "voicing = {}", voicing.utterance_value);
        for (t, &v) in f0.framewise.iter().enumerate() {
            if v != 0.0 {
                assert!((v - 220.0).abs() < 5.0, "frame {t}: {v} Hz");
            }
        }
    }

    #[test]
    fn noise_is_mostly_unvoiced() {
        let cfg = RunConfig::default();
        let buf = noise(0.5, 16_000, 0.7, 7);
        let (_, voicing) = extract_f0(&buf, &cfg).unwrap();
        assert!(voicing.utterance_value <= 0.2, "voicing = {}", voicing.utterance_value);
    }

    #[test]
    fn f0_aggregate_averages_voiced_frames_only() {
        let v = aggregate_utterance(PseudoLabel::F0, &[0.0, 200.0, 220.0]).unwrap();
        assert_abs_diff_eq!(v, 210.0);
        let silent = aggregate_utterance(PseudoLabel::F0, &[0.0, 0.0]).unwrap();
        assert_eq!(silent, 0.0);
        assert!(aggregate_utterance(PseudoLabel::F0, &[]).is_err());
    }

    #[test]
    fn alpha_ratio_hits_clamps_and_balance() {
        let cfg = RunConfig::default();
        let low = tone(0.3, 440.0, 16_000, 0.6);
        let spec = stft_power(&low, &cfg, "t").unwrap();
        let series = extract_alpha_ratio(&spec, &cfg).unwrap();
        assert_abs_diff_eq!(series.utterance_value, -60.0, epsilon = 1e-9);

        let high = tone(0.3, 2000.0, 16_000, 0.6);
        let spec = stft_power(&high, &cfg, "t").unwrap();
        let series = extract_alpha_ratio(&spec, &cfg).unwrap();
        assert_abs_diff_eq!(series.utterance_value, 60.0, epsilon = 1e-9);

        // Equal-amplitude tones on either side of the split.
        let n = 4800;
        let samples: Vec<f32> = (0..n)
            .map(|i| {
                let t = i as f64 / 16_000.0;
                let two_pi = 2.0 * std::f64::consts::PI;
                (0.3 * (two_pi * 500.0 * t).sin() + 0.3 * (two_pi * 2000.0 * t).sin()) as f32
            })
            .collect();
        let both = AudioBuffer { samples, sample_rate: 16_000 };
        let spec = stft_power(&both, &cfg, "t").unwrap();
        let series = extract_alpha_ratio(&spec, &cfg).unwrap();
        assert!(series.utterance_value.abs() < 1.0, "balance = {}", series.utterance_value);
    }

    #[test]
    fn zcr_alternating_and_tone_rates() {
        let cfg = RunConfig::default();
        let alternating = AudioBuffer {
            samples: (0..8000).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect(),
            sample_rate: 16_000,
        };
        let series = extract_zcr(&alternating, &cfg).unwrap();
        assert_abs_diff_eq!(series.framewise[0], 399.0 / 400.0, epsilon = 1e-12);

        let buf = tone(0.5, 440.0, 16_000, 0.5);
        let series = extract_zcr(&buf, &cfg).unwrap();
        let expected = 2.0 * 440.0 / 16_000.0; // 0.055
        assert!(
            (series.utterance_value - expected).abs() <= 0.1 * expected,
            "zcr = {}",
            series.utterance_value
        );
    }

    #[test]
    fn zcr_counts_zeros_as_positive() {
        let cfg = RunConfig::default();
        let mut samples = vec![0.0f32; 800];
        // A zero between two positives must not create crossings.
        samples[100] = 0.5;
        samples[101] = 0.0;
        samples[102] = 0.5;
        let buf = AudioBuffer { samples, sample_rate: 16_000 };
        let series = extract_zcr(&buf, &cfg).unwrap();
        assert_eq!(series.framewise[0], 0.0);
    }

    #[test]
    fn rasta_impulse_response_taps() {
        let mut x = vec![0.0; 12];
        x[0] = 1.0;
        let y = rasta_filter(&x);
        assert_abs_diff_eq!(y[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 0.296, epsilon = 1e-15);
        assert_abs_diff_eq!(y[2], 0.98 * 0.296, epsilon = 1e-15);
        assert_abs_diff_eq!(y[3], 0.98 * y[2] - 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(y[4], 0.98 * y[3] - 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(y[5], 0.98 * y[4], epsilon = 1e-15);
    }

    #[test]
    fn rasta_settles_to_zero_on_constant_input() {
        let x = vec![1.0; 900];
        let y = rasta_filter(&x);
        assert!(y[900 - 1].abs() < 1e-6, "tail = {}", y[899]);

        // Whole extractor on a constant mel matrix: late frames near zero,
        // and the aggregate excludes the transient.
        let mel = FeatureSequence::new("t", 900, 3, vec![1.0; 2700], 0.01, 0.025).unwrap();
        let series = extract_rasta_l1(&mel).unwrap();
        assert!(series.framewise[899] < 1e-5);
        assert!(series.framewise[0] > 0.1); // transient is visible framewise
        let tail_mean = series.framewise[4..].iter().sum::<f64>() / 896.0;
        assert_abs_diff_eq!(series.utterance_value, tail_mean, epsilon = 1e-12);
    }

    #[test]
    fn rasta_needs_five_frames() {
        let mel = FeatureSequence::new("t", 4, 2, vec![1.0; 8], 0.01, 0.025).unwrap();
        assert!(extract_rasta_l1(&mel).is_err());
        let mel = FeatureSequence::new("t", 5, 2, vec![1.0; 10], 0.01, 0.025).unwrap();
        assert!(extract_rasta_l1(&mel).is_ok());
    }

    #[test]
    fn hnr_mapping_and_signals() {
        assert_abs_diff_eq!(hnr_db(0.5, -20.0, 40.0), 0.0, epsilon = 1e-12);
        assert_eq!(hnr_db(0.0, -20.0, 40.0), -20.0);
        assert_eq!(hnr_db(-0.3, -20.0, 40.0), -20.0);
        assert_eq!(hnr_db(0.99999, -20.0, 40.0), 40.0);
        assert_eq!(hnr_db(1.0, -20.0, 40.0), 40.0);

        let cfg = RunConfig::default();
        let buf = tone(0.4, 180.0, 16_000, 0.7);
        let series = extract_log_hnr(&buf, &cfg).unwrap();
        assert!(series.utterance_value > 35.0, "tone hnr = {}", series.utterance_value);

        let buf = noise(0.4, 16_000, 0.7, 11);
        let series = extract_log_hnr(&buf, &cfg).unwrap();
        assert!(series.utterance_value < 5.0, "noise hnr = {}", series.utterance_value);
    }

    #[test]
    fn extract_all_is_in_canonical_order_and_aligned() {
        let cfg = RunConfig::default();
        let buf = tone(0.3, 200.0, 16_000, 0.5);
        let spec = stft_power(&buf, &cfg, "t").unwrap();
        let mel = mel_spectrogram(&spec, &cfg).unwrap();
        let all = extract_all(&buf, &spec, &mel, &cfg).unwrap();
        let labels: Vec<PseudoLabel> = all.iter().map(|s| s.label).collect();
        assert_eq!(labels, PseudoLabel::ALL.to_vec());
        for series in &all {
            assert_eq!(series.framewise.len(), mel.rows, "{}", series.label);
            assert!(series.utterance_value.is_finite());
        }
    }
}
