//! Run configuration: defaults, file parsing, overrides, validation.
//!
//! Config files are flat UTF-8 `key = value` lines. `#` starts a comment
//! (full-line or trailing), blank lines are ignored, and unknown keys are
//! rejected so typos fail loudly instead of silently using a default.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Fully resolved run configuration shared by every subcommand.
///
/// All fields have defaults, so an empty file (or no file at all) is a
/// valid configuration. A value of `0` on `fft_size`, `fmax`,
/// `max_duration_s`, or `max_per_class` means "auto" / "disabled".
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Sample rate the corpus is expected to use; mismatches only warn.
    pub expected_sample_rate: u32,
    /// Drop utterances longer than this many seconds (0 = keep everything).
    pub max_duration_s: f64,

    /// Analysis frame length in milliseconds.
    pub frame_ms: f64,
    /// Analysis hop in milliseconds.
    pub hop_ms: f64,
    /// Number of mel bands.
    pub n_mels: usize,
    /// FFT size; 0 picks the next power of two at or above the frame length.
    pub fft_size: usize,
    /// Lower edge of the mel filterbank in Hz.
    pub fmin: f64,
    /// Upper edge of the mel filterbank in Hz; 0 means the Nyquist frequency.
    pub fmax: f64,
    /// Pre-emphasis coefficient applied before framing; 0 disables it.
    pub preemphasis: f64,

    /// Lower bound of the pitch search range in Hz.
    pub f0_min: f64,
    /// Upper bound of the pitch search range in Hz.
    pub f0_max: f64,
    /// Periodicity score at or above which a frame counts as voiced.
    pub voicing_threshold: f64,
    /// Band split frequency for the spectral balance descriptor, in Hz.
    pub alpha_split_hz: f64,
    /// Symmetric clamp for the spectral balance descriptor, in dB.
    pub alpha_clamp_db: f64,
    /// Lower clamp of the harmonics-to-noise descriptor, in dB.
    pub hnr_min_db: f64,
    /// Upper clamp of the harmonics-to-noise descriptor, in dB.
    pub hnr_max_db: f64,

    /// Number of parts in the fixed-length embedding.
    pub n_parts: usize,
    /// Gaussian part width as a fraction of the sequence length.
    pub sigma_gd: f64,

    /// RBF kernel width applied to (standardized) pseudo-label values.
    pub rbf_sigma: f64,
    /// Z-score pseudo-label values over the evaluation set before the RBF.
    pub standardize: bool,
    /// Cap on members per class group (0 = uncapped).
    pub max_per_class: usize,
    /// Seed for the shuffle that picks members when a cap is set.
    pub shuffle_seed: u64,
    /// Free-form name echoed into reports.
    pub task_name: String,

    /// Synthetic benchmark: number of classes.
    pub synth_classes: usize,
    /// Synthetic benchmark: samples per class.
    pub synth_per_class: usize,
    /// Synthetic benchmark: embedding columns per part.
    pub synth_dim: usize,
    /// Synthetic benchmark: within-class embedding noise scale.
    pub synth_noise_x: f64,
    /// Synthetic benchmark: pseudo-label noise scale in independent mode.
    pub synth_noise_z: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            expected_sample_rate: 16_000,
            max_duration_s: 0.0,
            frame_ms: 25.0,
            hop_ms: 10.0,
            n_mels: 80,
            fft_size: 0,
            fmin: 0.0,
            fmax: 0.0,
            preemphasis: 0.0,
            f0_min: 60.0,
            f0_max: 400.0,
            voicing_threshold: 0.5,
            alpha_split_hz: 1000.0,
            alpha_clamp_db: 60.0,
            hnr_min_db: -20.0,
            hnr_max_db: 40.0,
            n_parts: 20,
            sigma_gd: 0.07,
            rbf_sigma: 0.05,
            standardize: true,
            max_per_class: 0,
            shuffle_seed: 0,
            task_name: "task".to_string(),
            synth_classes: 5,
            synth_per_class: 40,
            synth_dim: 8,
            synth_noise_x: 0.3,
            synth_noise_z: 0.02,
        }
    }
}

impl RunConfig {
    /// Load a config file and apply it on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected `key = value`, got `{}`",
                    path.display(),
                    lineno + 1,
                    line
                ))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply `key=value` override strings (e.g. from repeated CLI flags).
    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for pair in pairs {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                Error::Config(format!("override `{pair}` is not of the form key=value"))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    /// Set a single key from its textual value. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for key `{key}`")))
        }

        match key {
            "expected_sample_rate" => self.expected_sample_rate = parse(key, value)?,
            "max_duration_s" => self.max_duration_s = parse(key, value)?,
            "frame_ms" => self.frame_ms = parse(key, value)?,
            "hop_ms" => self.hop_ms = parse(key, value)?,
            "n_mels" => self.n_mels = parse(key, value)?,
            "fft_size" => self.fft_size = parse(key, value)?,
            "fmin" => self.fmin = parse(key, value)?,
            "fmax" => self.fmax = parse(key, value)?,
            "preemphasis" => self.preemphasis = parse(key, value)?,
            "f0_min" => self.f0_min = parse(key, value)?,
            "f0_max" => self.f0_max = parse(key, value)?,
            "voicing_threshold" => self.voicing_threshold = parse(key, value)?,
            "alpha_split_hz" => self.alpha_split_hz = parse(key, value)?,
            "alpha_clamp_db" => self.alpha_clamp_db = parse(key, value)?,
            "hnr_min_db" => self.hnr_min_db = parse(key, value)?,
            "hnr_max_db" => self.hnr_max_db = parse(key, value)?,
            "n_parts" => self.n_parts = parse(key, value)?,
            "sigma_gd" => self.sigma_gd = parse(key, value)?,
            "rbf_sigma" => self.rbf_sigma = parse(key, value)?,
            "standardize" => self.standardize = parse(key, value)?,
            "max_per_class" => self.max_per_class = parse(key, value)?,
            "shuffle_seed" => self.shuffle_seed = parse(key, value)?,
            "task_name" => self.task_name = value.to_string(),
            "synth_classes" => self.synth_classes = parse(key, value)?,
            "synth_per_class" => self.synth_per_class = parse(key, value)?,
            "synth_dim" => self.synth_dim = parse(key, value)?,
            "synth_noise_x" => self.synth_noise_x = parse(key, value)?,
            "synth_noise_z" => self.synth_noise_z = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Check numeric bounds. Called after file load and after overrides.
    pub fn validate(&self) -> Result<()> {
        // NaN and infinities must fail every bound, hence the explicit
        // finiteness checks.
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let non_negative = |v: f64| v.is_finite() && v >= 0.0;
        let mut problems = Vec::new();
        if !positive(self.frame_ms) {
            problems.push("frame_ms must be > 0");
        }
        if !positive(self.hop_ms) {
            problems.push("hop_ms must be > 0");
        }
        if self.n_mels == 0 {
            problems.push("n_mels must be >= 1");
        }
        if self.fft_size != 0 && !self.fft_size.is_power_of_two() {
            problems.push("fft_size must be 0 (auto) or a power of two");
        }
        if !non_negative(self.fmin) {
            problems.push("fmin must be >= 0");
        }
        if !self.fmax.is_finite() || (self.fmax != 0.0 && self.fmax <= self.fmin) {
            problems.push("fmax must be 0 (Nyquist) or > fmin");
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            problems.push("preemphasis must be in [0, 1)");
        }
        if !positive(self.f0_min) {
            problems.push("f0_min must be > 0");
        }
        if !self.f0_max.is_finite() || self.f0_max <= self.f0_min {
            problems.push("f0_max must be > f0_min");
        }
        if !(0.0..=1.0).contains(&self.voicing_threshold) {
            problems.push("voicing_threshold must be in [0, 1]");
        }
        if !positive(self.alpha_split_hz) {
            problems.push("alpha_split_hz must be > 0");
        }
        if !positive(self.alpha_clamp_db) {
            problems.push("alpha_clamp_db must be > 0");
        }
        if !self.hnr_min_db.is_finite()
            || !self.hnr_max_db.is_finite()
            || self.hnr_max_db <= self.hnr_min_db
        {
            problems.push("hnr_max_db must be > hnr_min_db");
        }
        if self.n_parts == 0 {
            problems.push("n_parts must be >= 1");
        }
        if !positive(self.sigma_gd) {
            problems.push("sigma_gd must be > 0");
        }
        if !positive(self.rbf_sigma) {
            problems.push("rbf_sigma must be > 0");
        }
        if !non_negative(self.max_duration_s) {
            problems.push("max_duration_s must be >= 0");
        }
        if self.synth_classes < 2 {
            problems.push("synth_classes must be >= 2");
        }
        if self.synth_per_class < 5 {
            problems.push("synth_per_class must be >= 5");
        }
        if self.synth_dim == 0 {
            problems.push("synth_dim must be >= 1");
        }
        if !non_negative(self.synth_noise_x) {
            problems.push("synth_noise_x must be >= 0");
        }
        if !non_negative(self.synth_noise_z) {
            problems.push("synth_noise_z must be >= 0");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// All keys and values as sorted text, used for the report echo.
    ///
    /// Must cover exactly the keys accepted by [`RunConfig::set`]; a unit
    /// test keeps the two in sync.
    pub fn echo_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("expected_sample_rate", self.expected_sample_rate.to_string());
        put("max_duration_s", fmt_f64(self.max_duration_s));
        put("frame_ms", fmt_f64(self.frame_ms));
        put("hop_ms", fmt_f64(self.hop_ms));
        put("n_mels", self.n_mels.to_string());
        put("fft_size", self.fft_size.to_string());
        put("fmin", fmt_f64(self.fmin));
        put("fmax", fmt_f64(self.fmax));
        put("preemphasis", fmt_f64(self.preemphasis));
        put("f0_min", fmt_f64(self.f0_min));
        put("f0_max", fmt_f64(self.f0_max));
        put("voicing_threshold", fmt_f64(self.voicing_threshold));
        put("alpha_split_hz", fmt_f64(self.alpha_split_hz));
        put("alpha_clamp_db", fmt_f64(self.alpha_clamp_db));
        put("hnr_min_db", fmt_f64(self.hnr_min_db));
        put("hnr_max_db", fmt_f64(self.hnr_max_db));
        put("n_parts", self.n_parts.to_string());
        put("sigma_gd", fmt_f64(self.sigma_gd));
        put("rbf_sigma", fmt_f64(self.rbf_sigma));
        put("standardize", self.standardize.to_string());
        put("max_per_class", self.max_per_class.to_string());
        put("shuffle_seed", self.shuffle_seed.to_string());
        put("task_name", self.task_name.clone());
        put("synth_classes", self.synth_classes.to_string());
        put("synth_per_class", self.synth_per_class.to_string());
        put("synth_dim", self.synth_dim.to_string());
        put("synth_noise_x", fmt_f64(self.synth_noise_x));
        put("synth_noise_z", fmt_f64(self.synth_noise_z));
        m
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn file_parsing_with_comments_and_blanks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# front end\nframe_ms = 20\n\nhop_ms = 5 # tighter hop\nstandardize = false\ntask_name = demo\n",
        )
        .unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.frame_ms, 20.0);
        assert_eq!(cfg.hop_ms, 5.0);
        assert!(!cfg.standardize);
        assert_eq!(cfg.task_name, "demo");
        assert_eq!(cfg.n_mels, 80);
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "frame_mss = 20\n").unwrap();
        let err = RunConfig::from_file(&path).unwrap_err();
        assert!(err.to_string().contains("unknown config key"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn malformed_line_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "frame_ms 20\n").unwrap();
        let err = RunConfig::from_file(&path).unwrap_err();
        assert!(err.to_string().contains("key = value"), "{err}");
    }

    #[test]
    fn out_of_range_value_rejected() {
        let mut cfg = RunConfig::default();
        cfg.set("rbf_sigma", "0").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("rbf_sigma"), "{err}");

        let mut cfg = RunConfig::default();
        cfg.set("f0_min", "500").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_win_and_are_validated() {
        let mut cfg = RunConfig::default();
        cfg.apply_overrides(["n_mels=40", "sigma_gd=0.1"]).unwrap();
        assert_eq!(cfg.n_mels, 40);
        assert_eq!(cfg.sigma_gd, 0.1);
        assert!(cfg.apply_overrides(["n_mels=0"]).is_err());
        assert!(cfg.apply_overrides(["n_mels"]).is_err());
    }

    #[test]
    fn echo_map_keys_round_trip_through_set() {
        let cfg = RunConfig::default();
        let echo = cfg.echo_map();
        let mut other = RunConfig::default();
        for (key, value) in &echo {
            other.set(key, value).unwrap();
        }
        other.validate().unwrap();
        assert_eq!(other.echo_map(), echo);
    }
}
