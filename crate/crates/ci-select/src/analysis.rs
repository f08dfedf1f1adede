//! Ranking, rank correlation, group selection, and the synthetic
//! dependence benchmark.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::embed::FixedEmbedding;
use crate::error::{Error, Result};
use crate::hsic::CIScore;

/// One ranked pseudo-label in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub ci: f64,
    /// 1-based rank by ascending CI; ties share their average rank.
    pub rank: f64,
    #[serde(default)]
    pub per_class: BTreeMap<String, f64>,
}

/// Scores for a set of pseudo-labels on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CIReport {
    pub task_name: String,
    #[serde(default)]
    pub config_echo: BTreeMap<String, String>,
    /// Sorted ascending by CI (ties by name).
    pub entries: Vec<ReportEntry>,
}

impl CIReport {
    /// Flat CSV form of the entries table: `name,ci,rank`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,ci,rank\n");
        for e in &self.entries {
            out.push_str(&format!("{},{:.6},{:.6}\n", e.name, e.ci, e.rank));
        }
        out
    }
}

/// Rank correlation between a score vector and an error vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub spearman_rho: f64,
    pub kendall_tau: f64,
    pub n: usize,
}

/// Order scored labels ascending by CI (ties by name) and assign
/// average ranks.
pub fn rank_entries(scores: &[(String, CIScore)]) -> Result<Vec<ReportEntry>> {
    if scores.is_empty() {
        return Err(Error::Analysis("no scores to rank".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for (name, score) in scores {
        if !score.aggregate.is_finite() {
            return Err(Error::Internal(format!("non-finite CI for `{name}`")));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::Analysis(format!("duplicate label `{name}` in scores")));
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .1
            .aggregate
            .total_cmp(&scores[b].1.aggregate)
            .then_with(|| scores[a].0.cmp(&scores[b].0))
    });
    let sorted_ci: Vec<f64> = order.iter().map(|&i| scores[i].1.aggregate).collect();
    let ranks = average_ranks(&sorted_ci);
    Ok(order
        .iter()
        .zip(ranks)
        .map(|(&i, rank)| ReportEntry {
            name: scores[i].0.clone(),
            ci: scores[i].1.aggregate,
            rank,
            per_class: scores[i].1.per_class.clone(),
        })
        .collect())
}

/// Average ranks (1-based); tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average of ranks i+1..=j+1.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
///
/// A constant vector has zero rank variance and is an error, not a NaN.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    if dx == 0.0 || dy == 0.0 {
        return Err(Error::Analysis("rank correlation undefined for a constant vector".into()));
    }
    Ok(num / (dx * dy).sqrt())
}

/// Kendall's tau-b with tie corrections.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y)?;
    let n = x.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_x, mut ties_y) = (0i64, 0i64);
    // f64::signum maps +0.0 to 1.0, so compare explicitly to catch ties.
    let sign = |d: f64| {
        if d > 0.0 {
            1i64
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    };
    for i in 0..n {
        for j in i + 1..n {
            let dx = sign(x[i] - x[j]);
            let dy = sign(y[i] - y[j]);
            if dx == 0 {
                ties_x += 1;
            }
            if dy == 0 {
                ties_y += 1;
            }
            if dx != 0 && dy != 0 {
                if dx == dy {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = ((n0 - ties_x) as f64 * (n0 - ties_y) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Analysis("rank correlation undefined for a constant vector".into()));
    }
    Ok((concordant - discordant) as f64 / denom)
}

fn check_paired(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Analysis(format!(
            "paired vectors differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Analysis(format!(
            "correlation needs at least 2 pairs, got {}",
            x.len()
        )));
    }
    for v in x.iter().chain(y) {
        if !v.is_finite() {
            return Err(Error::Analysis("non-finite value in correlation input".into()));
        }
    }
    Ok(())
}

/// Split a ranked report into the `k_best` lowest-CI labels (ascending)
/// and the `k_worst` highest-CI labels (descending). Ties are broken by
/// name via the report's canonical order, and the two sets never overlap
/// because `k_best + k_worst` may not exceed the number of entries.
pub fn select_groups(
    report: &CIReport,
    k_best: usize,
    k_worst: usize,
) -> Result<(Vec<String>, Vec<String>)> {
    let k = report.entries.len();
    if k_best + k_worst > k {
        return Err(Error::Analysis(format!(
            "cannot select {k_best} best and {k_worst} worst from {k} entries"
        )));
    }
    let mut entries: Vec<&ReportEntry> = report.entries.iter().collect();
    entries.sort_by(|a, b| a.ci.total_cmp(&b.ci).then_with(|| a.name.cmp(&b.name)));
    let best = entries[..k_best].iter().map(|e| e.name.clone()).collect();
    let worst = entries[k - k_worst..].iter().rev().map(|e| e.name.clone()).collect();
    Ok((best, worst))
}

/// How the synthetic pseudo-label relates to the synthetic embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthMode {
    /// The label is a fixed linear functional of each sample's own noise,
    /// so it stays dependent on the embedding within every class.
    Dependent,
    /// The label depends only on the class plus independent noise.
    Independent,
}

/// A generated evaluation set: balanced classes of noisy centroids with a
/// scalar pseudo-label per sample.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub ids: Vec<String>,
    pub classes: Vec<String>,
    pub embeddings: Vec<FixedEmbedding>,
    pub values: Vec<f64>,
}

/// Deterministically generate a synthetic evaluation set for `seed`.
///
/// Embeddings are `cfg.n_parts` x `cfg.synth_dim`, drawn as a class
/// centroid plus white noise of scale `cfg.synth_noise_x`. In dependent
/// mode the value is a unit linear functional of the sample's noise; in
/// independent mode it is the class index plus noise of scale
/// `cfg.synth_noise_z` (exactly class-constant when that is 0).
pub fn synth_generate(mode: SynthMode, cfg: &RunConfig, seed: u64) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = cfg.n_parts * cfg.synth_dim;

    // Fixed functional shared by every sample of this dataset.
    let mut w: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
    let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut w {
        *v /= w_norm;
    }

    let mut ids = Vec::new();
    let mut classes = Vec::new();
    let mut embeddings = Vec::new();
    let mut values = Vec::new();
    for c in 0..cfg.synth_classes {
        let centroid: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
        for s in 0..cfg.synth_per_class {
            let noise: Vec<f64> = (0..dim).map(|_| cfg.synth_noise_x * normal(&mut rng)).collect();
            let data: Vec<f64> = centroid.iter().zip(&noise).map(|(m, e)| m + e).collect();
            let value = match mode {
                SynthMode::Dependent => w.iter().zip(&noise).map(|(a, b)| a * b).sum(),
                SynthMode::Independent => c as f64 + cfg.synth_noise_z * normal(&mut rng),
            };
            ids.push(format!("synth-{c}-{s}"));
            classes.push(format!("class-{c}"));
            embeddings.push(FixedEmbedding {
                source_id: format!("synth-{c}-{s}"),
                parts: cfg.n_parts,
                cols: cfg.synth_dim,
                data,
            });
            values.push(value);
        }
    }
    Ok(SynthDataset { ids, classes, embeddings, values })
}

/// Standard normal via Box-Muller.
fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Serialize to deterministic JSON: object keys sorted, every float at
/// six decimals, trailing newline. Non-finite floats are an error.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)
        .map_err(|e| Error::Internal(format!("serialization failed: {e}")))?;
    let mut out = String::new();
    write_value(&mut out, &v, 0)?;
    out.push('\n');
    Ok(out)
}

fn write_value(out: &mut String, v: &serde_json::Value, depth: usize) -> Result<()> {
    use serde_json::Value;
    match v {
        // serde_json turns NaN and infinities into null, and no report
        // type has a legitimate null, so reject it outright.
        Value::Null => {
            return Err(Error::Analysis(
                "cannot serialize null (NaN and infinite floats are not representable)".into(),
            ))
        }
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format!("{:.6}", n.as_f64().unwrap()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline_indent(out, depth + 1);
                write_value(out, item, depth + 1)?;
            }
            newline_indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            out.push('{');
            // serde_json maps are BTreeMap-backed, so iteration is sorted.
            for (i, (key, value)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline_indent(out, depth + 1);
                out.push_str(&serde_json::Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, value, depth + 1)?;
            }
            newline_indent(out, depth);
            out.push('}');
        }
    }
    Ok(())
}

fn newline_indent(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn score(aggregate: f64) -> CIScore {
        CIScore { per_class: BTreeMap::new(), aggregate, total: 4 }
    }

    /// Rank by counting, no sorting: an independent route to average ranks.
    fn counting_ranks(values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|&v| {
                let less = values.iter().filter(|&&o| o < v).count() as f64;
                let equal = values.iter().filter(|&&o| o == v).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    }

    #[test]
    fn average_ranks_match_counting_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.gen_range(2..20);
            // Coarse grid to force plenty of ties.
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64).collect();
            assert_eq!(average_ranks(&values), counting_ranks(&values));
        }
    }

    #[test]
    fn rank_entries_sorts_and_assigns_average_ranks() {
        let scores = vec![
            ("c".to_string(), score(0.5)),
            ("a".to_string(), score(0.1)),
            ("b".to_string(), score(0.5)),
            ("d".to_string(), score(0.9)),
        ];
        let entries = rank_entries(&scores).unwrap();
        let names: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c", "d"]); // ties ordered by name
        let ranks: Vec<f64> = entries.iter().map(|e| e.rank).collect();
        assert_eq!(ranks, [1.0, 2.5, 2.5, 4.0]);

        let dup = vec![("a".to_string(), score(0.1)), ("a".to_string(), score(0.2))];
        assert!(rank_entries(&dup).is_err());
    }

    #[test]
    fn spearman_matches_independent_pearson_on_ranks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.gen_range(3..15);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
            let got = match spearman(&x, &y) {
                Ok(v) => v,
                Err(_) => continue, // constant draw
            };
            let rx = counting_ranks(&x);
            let ry = counting_ranks(&y);
            let n = x.len() as f64;
            let mx = rx.iter().sum::<f64>() / n;
            let my = ry.iter().sum::<f64>() / n;
            let num: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
            let dx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
            let dy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
            let want = num / (dx * dy).sqrt();
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn perfect_and_reversed_orderings() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let up = [10.0, 20.0, 30.0, 40.0];
        let down = [4.0, 3.0, 2.0, 1.0];
        assert_abs_diff_eq!(spearman(&x, &up).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman(&x, &down).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kendall_tau(&x, &up).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kendall_tau(&x, &down).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn kendall_small_fixture() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 2.0];
        assert_abs_diff_eq!(kendall_tau(&x, &y).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_vectors_error_not_nan() {
        let c = [2.0, 2.0, 2.0];
        let y = [1.0, 2.0, 3.0];
        assert!(spearman(&c, &y).is_err());
        assert!(kendall_tau(&c, &y).is_err());
        assert!(spearman(&y, &c).is_err());
        assert!(spearman(&y[..1], &c[..1]).is_err());
        assert!(spearman(&y, &c[..2]).is_err());
    }

    #[test]
    fn tau_b_handles_partial_ties() {
        // x has one tied pair; hand count: pairs (n=4) -> n0 = 6.
        let x = [1.0, 1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        // ties_x = 1, ties_y = 0; concordant = 5, discordant = 0.
        let want = 5.0 / ((6.0 - 1.0) * 6.0f64).sqrt();
        assert_abs_diff_eq!(kendall_tau(&x, &y).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn select_groups_splits_without_overlap() {
        let entry = |name: &str, ci: f64| ReportEntry {
            name: name.into(),
            ci,
            rank: 0.0,
            per_class: BTreeMap::new(),
        };
        let report = CIReport {
            task_name: "t".into(),
            config_echo: BTreeMap::new(),
            entries: vec![
                entry("p", 0.3),
                entry("q", 0.1),
                entry("r", 0.1),
                entry("s", 0.9),
                entry("t", 0.5),
            ],
        };
        let (best, worst) = select_groups(&report, 2, 2).unwrap();
        assert_eq!(best, ["q", "r"]);
        assert_eq!(worst, ["s", "t"]);
        assert!(select_groups(&report, 3, 3).is_err());

        // Full tie: selections stay disjoint and deterministic.
        let tied = CIReport {
            task_name: "t".into(),
            config_echo: BTreeMap::new(),
            entries: vec![entry("a", 0.2), entry("b", 0.2), entry("c", 0.2), entry("d", 0.2)],
        };
        let (best, worst) = select_groups(&tied, 2, 2).unwrap();
        assert_eq!(best, ["a", "b"]);
        assert_eq!(worst, ["d", "c"]);
    }

    #[test]
    fn synth_is_deterministic_per_seed_and_balanced() {
        let cfg = RunConfig::default();
        let a = synth_generate(SynthMode::Dependent, &cfg, 7).unwrap();
        let b = synth_generate(SynthMode::Dependent, &cfg, 7).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.ids, b.ids);
        assert_eq!(a.embeddings[3].data, b.embeddings[3].data);
        let c = synth_generate(SynthMode::Dependent, &cfg, 8).unwrap();
        assert_ne!(a.values, c.values);

        assert_eq!(a.ids.len(), 200);
        let per_class = a.classes.iter().filter(|c| c.as_str() == "class-0").count();
        assert_eq!(per_class, 40);
        assert_eq!(a.embeddings[0].parts, 20);
        assert_eq!(a.embeddings[0].cols, 8);
    }

    #[test]
    fn zero_noise_independent_values_are_class_constant() {
        let cfg = RunConfig { synth_noise_z: 0.0, ..RunConfig::default() };
        let data = synth_generate(SynthMode::Independent, &cfg, 3).unwrap();
        for (class, value) in data.classes.iter().zip(&data.values) {
            let idx: f64 = class.strip_prefix("class-").unwrap().parse().unwrap();
            assert_eq!(*value, idx);
        }
    }

    #[test]
    fn canonical_json_is_sorted_and_six_decimal() {
        #[derive(Serialize)]
        struct Demo {
            zebra: f64,
            apple: u32,
            nested: BTreeMap<String, f64>,
            list: Vec<f64>,
            empty: Vec<f64>,
        }
        let mut nested = BTreeMap::new();
        nested.insert("k".to_string(), 0.5);
        let text = to_canonical_json(&Demo {
            zebra: 1.0 / 3.0,
            apple: 7,
            nested,
            list: vec![1.0],
            empty: vec![],
        })
        .unwrap();
        let apple = text.find("\"apple\"").unwrap();
        let zebra = text.find("\"zebra\"").unwrap();
        assert!(apple < zebra, "{text}");
        assert!(text.contains("0.333333"), "{text}");
        assert!(text.contains("\"apple\": 7"), "{text}");
        assert!(text.contains("1.000000"), "{text}");
        assert!(text.contains("\"empty\": []"), "{text}");
        assert!(text.ends_with('\n'));
        // Emitted text is valid JSON and round-trips.
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["apple"], serde_json::json!(7));

        assert!(to_canonical_json(&f64::NAN).is_err());
    }

    #[test]
    fn report_round_trips_through_canonical_json() {
        let report = CIReport {
            task_name: "demo".into(),
            config_echo: RunConfig::default().echo_map(),
            entries: vec![ReportEntry {
                name: "zcr".into(),
                ci: 0.123456789,
                rank: 1.0,
                per_class: BTreeMap::from([("a".to_string(), 0.25)]),
            }],
        };
        let text = to_canonical_json(&report).unwrap();
        let back: CIReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.task_name, "demo");
        assert_eq!(back.entries.len(), 1);
        // Six-decimal truncation is part of the format.
        assert_abs_diff_eq!(back.entries[0].ci, 0.123457, epsilon = 1e-12);
        assert_eq!(report.to_csv(), "name,ci,rank\nzcr,0.123457,1.000000\n");
    }
}
