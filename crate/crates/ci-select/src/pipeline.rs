//! End-to-end commands behind the CLI: feature extraction, contamination
//! scoring, error correlation, and the synthetic benchmark.
//!
//! Every command is a plain function over paths and a [`RunConfig`], so
//! the same code drives the binary, the examples, and the tests.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    kendall_tau, rank_entries, spearman, synth_generate, to_canonical_json, CIReport, SynthMode,
};
use crate::config::RunConfig;
use crate::corpus::{
    cache_read, cache_write, load_manifest, read_wav, slice_segment, AudioBuffer, UtteranceRecord,
};
use crate::dsp::{mel_spectrogram, stft_power};
use crate::embed::{gaussian_downsample, FixedEmbedding};
use crate::error::{Error, Result};
use crate::hsic::{ci_for_label, group_by_class, CIScore};
use crate::pseudolabels::{extract_all, PseudoLabel};

/// File name of the per-utterance pseudo-label table inside a features dir.
pub const LABELS_CSV: &str = "pseudo_labels.csv";

/// Cache file extension for feature sequences.
pub const CACHE_EXT: &str = "cife";

/// Resolve a config file (defaults when absent) and apply `key=value`
/// overrides on top.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(overrides.iter().map(|s| s.as_str()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Cap the rayon pool from `CI_SELECT_THREADS` when the variable is set.
/// Safe to call more than once; later calls keep the existing pool.
pub fn init_thread_pool() -> Result<()> {
    match std::env::var("CI_SELECT_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                Error::Config(format!("CI_SELECT_THREADS must be a positive integer, got `{raw}`"))
            })?;
            if n == 0 {
                return Err(Error::Config("CI_SELECT_THREADS must be >= 1".into()));
            }
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        }
    }
}

/// What `cmd_extract` did, for reporting and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractSummary {
    /// Utterances processed with a fresh cache written.
    pub extracted: usize,
    /// Utterances whose cache was already present (no `--force`).
    pub skipped: usize,
    /// Utterances dropped by the max-duration filter.
    pub filtered: usize,
    /// Human-readable warnings (sample-rate mismatches), manifest order.
    pub warnings: Vec<String>,
}

struct ExtractedRow {
    id: String,
    class_label: String,
    values: [f64; 7],
    wrote: bool,
    warning: Option<String>,
}

enum RowOutcome {
    Kept(Box<ExtractedRow>),
    Filtered,
}

/// Compute features and pseudo-labels for every manifest utterance.
///
/// Writes one cache file per kept utterance into `out_dir` plus a
/// `pseudo_labels.csv` table. Existing caches are kept unless `force` is
/// set, but pseudo-labels are always recomputed so the table stays
/// complete.
pub fn cmd_extract(
    manifest: &Path,
    cfg: &RunConfig,
    out_dir: &Path,
    force: bool,
) -> Result<ExtractSummary> {
    let records = load_manifest(manifest)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let outcomes: Vec<RowOutcome> = records
        .par_iter()
        .map(|record| process_record(record, cfg, out_dir, force))
        .collect::<Result<_>>()?;

    let mut summary =
        ExtractSummary { extracted: 0, skipped: 0, filtered: 0, warnings: Vec::new() };
    let mut csv = String::from(
        "utterance_id,class_label,loudness,f0,voicing,alpha_ratio,zcr,rasta_l1,log_hnr\n",
    );
    for outcome in &outcomes {
        match outcome {
            RowOutcome::Filtered => summary.filtered += 1,
            RowOutcome::Kept(row) => {
                if row.wrote {
                    summary.extracted += 1;
                } else {
                    summary.skipped += 1;
                }
                if let Some(w) = &row.warning {
                    summary.warnings.push(w.clone());
                }
                csv.push_str(&row.id);
                csv.push(',');
                csv.push_str(&row.class_label);
                for v in row.values {
                    csv.push_str(&format!(",{v}"));
                }
                csv.push('\n');
            }
        }
    }
    let csv_path = out_dir.join(LABELS_CSV);
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    Ok(summary)
}

fn process_record(
    record: &UtteranceRecord,
    cfg: &RunConfig,
    out_dir: &Path,
    force: bool,
) -> Result<RowOutcome> {
    let full = read_wav(&record.audio_path)?;
    let warning = (full.sample_rate != cfg.expected_sample_rate).then(|| {
        format!(
            "utterance `{}`: sample rate {} Hz differs from expected {} Hz",
            record.utterance_id, full.sample_rate, cfg.expected_sample_rate
        )
    });
    let buf: AudioBuffer = match (record.start_s, record.end_s) {
        (Some(s), Some(e)) => slice_segment(&full, s, e)?,
        _ => full,
    };
    if cfg.max_duration_s > 0.0 && buf.duration_s() > cfg.max_duration_s {
        return Ok(RowOutcome::Filtered);
    }

    let spec = stft_power(&buf, cfg, &record.utterance_id)?;
    let mel = mel_spectrogram(&spec, cfg)?;
    let series = extract_all(&buf, &spec, &mel, cfg)?;
    let mut values = [0.0; 7];
    for (slot, s) in values.iter_mut().zip(&series) {
        *slot = s.utterance_value;
    }

    let cache_path = out_dir.join(format!("{}.{CACHE_EXT}", record.utterance_id));
    let wrote = if cache_path.exists() && !force {
        false
    } else {
        cache_write(&cache_path, &mel)?;
        true
    };

    Ok(RowOutcome::Kept(Box::new(ExtractedRow {
        id: record.utterance_id.clone(),
        class_label: record.class_label.clone(),
        values,
        wrote,
        warning,
    })))
}

/// Parse the `--labels` argument: `all` or a comma-separated name list.
pub fn parse_labels(arg: &str) -> Result<Vec<PseudoLabel>> {
    if arg == "all" {
        return Ok(PseudoLabel::ALL.to_vec());
    }
    let mut labels = Vec::new();
    for part in arg.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(Error::Config(format!("empty label name in `{arg}`")));
        }
        let label: PseudoLabel = part.parse()?;
        if labels.contains(&label) {
            return Err(Error::Config(format!("duplicate label `{label}` in `{arg}`")));
        }
        labels.push(label);
    }
    Ok(labels)
}

struct EvalRow {
    id: String,
    class_label: String,
    values: [f64; 7],
}

/// Score the requested pseudo-labels over an extracted corpus and write
/// the ranked report (and optionally its CSV form).
pub fn cmd_ci(
    manifest: &Path,
    features_dir: &Path,
    labels_arg: &str,
    cfg: &RunConfig,
    out: &Path,
    csv_out: Option<&Path>,
) -> Result<CIReport> {
    let labels = parse_labels(labels_arg)?;
    let records = load_manifest(manifest)?;
    let table = read_labels_csv(&features_dir.join(LABELS_CSV))?;

    // The label table lists exactly what extract kept; join it with the
    // manifest so classes are authoritative and order follows the manifest.
    let mut rows = Vec::new();
    for record in &records {
        match table.get(&record.utterance_id) {
            Some((class_label, values)) => {
                if class_label != &record.class_label {
                    return Err(Error::Analysis(format!(
                        "class for `{}` is `{}` in the manifest but `{}` in {LABELS_CSV}; re-run extract",
                        record.utterance_id, record.class_label, class_label
                    )));
                }
                rows.push(EvalRow {
                    id: record.utterance_id.clone(),
                    class_label: class_label.clone(),
                    values: *values,
                });
            }
            None if cfg.max_duration_s > 0.0 => {} // dropped by the filter
            None => {
                return Err(Error::Analysis(format!(
                    "no pseudo-labels for `{}` in {}; run `ci-select extract` first",
                    record.utterance_id,
                    features_dir.display()
                )));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Analysis("no utterances left to score".into()));
    }

    let embeddings: Vec<FixedEmbedding> = rows
        .par_iter()
        .map(|row| {
            let path = features_dir.join(format!("{}.{CACHE_EXT}", row.id));
            if !path.exists() {
                return Err(Error::Analysis(format!(
                    "no feature cache for `{}` in {}; run `ci-select extract` first",
                    row.id,
                    features_dir.display()
                )));
            }
            let seq = cache_read(&path)?;
            if seq.cols != cfg.n_mels {
                return Err(Error::Analysis(format!(
                    "cache for `{}` has {} feature columns but the config says n_mels = {}; \
                     re-run extract with --force",
                    row.id, seq.cols, cfg.n_mels
                )));
            }
            gaussian_downsample(&seq, cfg.n_parts, cfg.sigma_gd)
        })
        .collect::<Result<_>>()?;

    let ids: Vec<String> = rows.iter().map(|r| r.id.clone()).collect();
    let classes: Vec<String> = rows.iter().map(|r| r.class_label.clone()).collect();
    let groups = group_by_class(&ids, &classes, cfg.max_per_class, cfg.shuffle_seed)?;

    let scores: Vec<(String, CIScore)> = labels
        .iter()
        .map(|&label| {
            let column = label_column(label);
            let values: Vec<f64> = rows.iter().map(|r| r.values[column]).collect();
            let score = ci_for_label(&groups, &embeddings, &values, cfg)?;
            Ok((label.name().to_string(), score))
        })
        .collect::<Result<_>>()?;

    let report = CIReport {
        task_name: cfg.task_name.clone(),
        config_echo: cfg.echo_map(),
        entries: rank_entries(&scores)?,
    };
    let json = to_canonical_json(&report)?;
    std::fs::write(out, json).map_err(|e| Error::io(out, e))?;
    if let Some(path) = csv_out {
        std::fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(report)
}

fn label_column(label: PseudoLabel) -> usize {
    PseudoLabel::ALL.iter().position(|&l| l == label).unwrap()
}

type LabelTable = BTreeMap<String, (String, [f64; 7])>;

fn read_labels_csv(path: &Path) -> Result<LabelTable> {
    let table_err = |message: String| Error::Analysis(format!("{}: {message}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| table_err(e.to_string()))?;
    let mut expected = vec!["utterance_id".to_string(), "class_label".to_string()];
    expected.extend(PseudoLabel::ALL.iter().map(|l| l.name().to_string()));
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| table_err(e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if headers != expected {
        return Err(table_err(format!(
            "unexpected header `{}`; re-run extract",
            headers.join(",")
        )));
    }
    let mut table = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| table_err(e.to_string()))?;
        if row.len() != expected.len() {
            return Err(table_err(format!("row {}: wrong field count", i + 2)));
        }
        let mut values = [0.0; 7];
        for (j, v) in values.iter_mut().enumerate() {
            *v = row[j + 2]
                .parse()
                .map_err(|_| table_err(format!("row {}: bad number `{}`", i + 2, &row[j + 2])))?;
        }
        if table.insert(row[0].to_string(), (row[1].to_string(), values)).is_some() {
            return Err(table_err(format!("duplicate utterance `{}`", &row[0])));
        }
    }
    Ok(table)
}

/// One matched (score, error) row in a correlation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub name: String,
    pub ci: f64,
    pub error: f64,
}

/// Output of `cmd_correlate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n: usize,
    pub spearman_rho: f64,
    pub kendall_tau: f64,
    pub pairs: Vec<CorrelationPair>,
}

/// Correlate a CI report with downstream error rates by exact name match.
pub fn cmd_correlate(
    report_path: &Path,
    errors_path: &Path,
    out: &Path,
) -> Result<CorrelationReport> {
    let text = std::fs::read_to_string(report_path).map_err(|e| Error::io(report_path, e))?;
    let report: CIReport = serde_json::from_str(&text).map_err(|e| {
        Error::Analysis(format!("{} is not a CI report: {e}", report_path.display()))
    })?;
    let errors = read_errors_csv(errors_path)?;

    let report_names: Vec<&str> = report.entries.iter().map(|e| e.name.as_str()).collect();
    let mut missing: Vec<&str> =
        report_names.iter().filter(|n| !errors.contains_key(**n)).copied().collect();
    let mut extra: Vec<&str> =
        errors.keys().map(|s| s.as_str()).filter(|n| !report_names.contains(n)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        missing.sort_unstable();
        extra.sort_unstable();
        return Err(Error::Analysis(format!(
            "pseudo-label names disagree: report-only [{}], errors-only [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }

    let pairs: Vec<CorrelationPair> = report
        .entries
        .iter()
        .map(|e| CorrelationPair { name: e.name.clone(), ci: e.ci, error: errors[&e.name] })
        .collect();
    let ci: Vec<f64> = pairs.iter().map(|p| p.ci).collect();
    let err: Vec<f64> = pairs.iter().map(|p| p.error).collect();
    let result = CorrelationReport {
        n: pairs.len(),
        spearman_rho: spearman(&ci, &err)?,
        kendall_tau: kendall_tau(&ci, &err)?,
        pairs,
    };
    let json = to_canonical_json(&result)?;
    std::fs::write(out, json).map_err(|e| Error::io(out, e))?;
    Ok(result)
}

fn read_errors_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    let table_err = |message: String| Error::Analysis(format!("{}: {message}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| table_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| table_err(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["pseudo_label", "error_rate"] {
        return Err(table_err(format!(
            "header must be `pseudo_label,error_rate`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut table = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| table_err(e.to_string()))?;
        if row.len() != 2 {
            return Err(table_err(format!("row {}: wrong field count", i + 2)));
        }
        let rate: f64 = row[1]
            .parse()
            .map_err(|_| table_err(format!("row {}: bad error rate `{}`", i + 2, &row[1])))?;
        if table.insert(row[0].to_string(), rate).is_some() {
            return Err(table_err(format!("duplicate pseudo-label `{}`", &row[0])));
        }
    }
    if table.is_empty() {
        return Err(table_err("no rows".into()));
    }
    Ok(table)
}

/// One seed's outcome in the synthetic benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dependent_ci: f64,
    pub independent_ci: f64,
    pub separated: bool,
}

/// Output of `cmd_synth_bench`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_echo: BTreeMap<String, String>,
    pub seeds: usize,
    pub per_seed: Vec<SeedOutcome>,
    pub mean_dependent: f64,
    pub mean_independent: f64,
    pub separated: usize,
    pub verdict: String,
}

/// Score one synthetic dataset end to end.
pub fn synth_ci(mode: SynthMode, cfg: &RunConfig, seed: u64) -> Result<f64> {
    let data = synth_generate(mode, cfg, seed)?;
    let groups = group_by_class(&data.ids, &data.classes, cfg.max_per_class, cfg.shuffle_seed)?;
    Ok(ci_for_label(&groups, &data.embeddings, &data.values, cfg)?.aggregate)
}

/// Run dependent and independent synthetic datasets for seeds `0..seeds`
/// and check that the dependent score wins every time.
pub fn cmd_synth_bench(cfg: &RunConfig, seeds: usize, out: &Path) -> Result<BenchReport> {
    if seeds == 0 {
        return Err(Error::Config("--seeds must be >= 1".into()));
    }
    let per_seed: Vec<SeedOutcome> = (0..seeds as u64)
        .map(|seed| {
            let dependent_ci = synth_ci(SynthMode::Dependent, cfg, seed)?;
            let independent_ci = synth_ci(SynthMode::Independent, cfg, seed)?;
            Ok(SeedOutcome {
                seed,
                dependent_ci,
                independent_ci,
                separated: dependent_ci > independent_ci,
            })
        })
        .collect::<Result<_>>()?;
    let separated = per_seed.iter().filter(|s| s.separated).count();
    let mean =
        |f: fn(&SeedOutcome) -> f64| per_seed.iter().map(f).sum::<f64>() / per_seed.len() as f64;
    let mean_dependent = mean(|s| s.dependent_ci);
    let mean_independent = mean(|s| s.independent_ci);
    let report = BenchReport {
        config_echo: cfg.echo_map(),
        seeds,
        per_seed,
        mean_dependent,
        mean_independent,
        separated,
        verdict: format!("separated {separated}/{seeds}"),
    };
    let json = to_canonical_json(&report)?;
    std::fs::write(out, json).map_err(|e| Error::io(out, e))?;
    Ok(report)
}
