use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ci_select::pipeline::{
    cmd_ci, cmd_correlate, cmd_extract, cmd_synth_bench, init_thread_pool, load_config,
};
use ci_select::Error;

#[derive(Parser)]
#[command(name = "ci-select", version, about = "Rank pseudo-labels by class-information leakage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract feature caches and pseudo-labels from a corpus manifest
    Extract {
        /// Corpus manifest CSV
        #[arg(long)]
        manifest: PathBuf,
        /// Config file (key = value lines); defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for caches and pseudo_labels.csv
        #[arg(long)]
        out: PathBuf,
        /// Recompute caches even when they already exist
        #[arg(long)]
        force: bool,
        /// Override a config key, e.g. --set n_mels=40 (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Score pseudo-labels against extracted features and rank them
    Ci {
        /// Corpus manifest CSV
        #[arg(long)]
        manifest: PathBuf,
        /// Directory produced by `extract`
        #[arg(long)]
        features: PathBuf,
        /// `all` or a comma-separated list of pseudo-label names
        #[arg(long, default_value = "all")]
        labels: String,
        /// Config file (key = value lines); defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report JSON path
        #[arg(long)]
        out: PathBuf,
        /// Also write the flat CSV form of the report here
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Override a config key, e.g. --set max_per_class=50 (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Correlate a CI report with downstream error rates
    Correlate {
        /// Report JSON written by `ci`
        #[arg(long)]
        report: PathBuf,
        /// CSV with header `pseudo_label,error_rate`
        #[arg(long)]
        errors: PathBuf,
        /// Correlation JSON path
        #[arg(long)]
        out: PathBuf,
    },
    /// Check dependent vs independent synthetic data separation
    SynthBench {
        /// Config file (key = value lines); defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of seeds to run (0, 1, ..)
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Benchmark JSON path
        #[arg(long)]
        out: PathBuf,
        /// Override a config key, e.g. --set synth_noise_z=0.1 (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    init_thread_pool()?;
    match cli.command {
        Command::Extract { manifest, config, out, force, set } => {
            let cfg = load_config(config.as_deref(), &set)?;
            let summary = cmd_extract(&manifest, &cfg, &out, force)?;
            for warning in &summary.warnings {
                eprintln!("warning: {warning}");
            }
            if summary.filtered > 0 {
                println!(
                    "extracted: {}, skipped: {}, filtered: {}",
                    summary.extracted, summary.skipped, summary.filtered
                );
            } else {
                println!("extracted: {}, skipped: {}", summary.extracted, summary.skipped);
            }
        }
        Command::Ci { manifest, features, labels, config, out, csv, set } => {
            let cfg = load_config(config.as_deref(), &set)?;
            let report = cmd_ci(&manifest, &features, &labels, &cfg, &out, csv.as_deref())?;
            for entry in &report.entries {
                println!("{:>4.1}  {:<12} {:.6}", entry.rank, entry.name, entry.ci);
            }
            println!("wrote {}", out.display());
        }
        Command::Correlate { report, errors, out } => {
            let result = cmd_correlate(&report, &errors, &out)?;
            println!(
                "n = {}, spearman_rho = {:.6}, kendall_tau = {:.6}",
                result.n, result.spearman_rho, result.kendall_tau
            );
            println!("wrote {}", out.display());
        }
        Command::SynthBench { config, seeds, out, set } => {
            let cfg = load_config(config.as_deref(), &set)?;
            let report = cmd_synth_bench(&cfg, seeds, &out)?;
            println!(
                "mean dependent CI = {:.6}, mean independent CI = {:.6}",
                report.mean_dependent, report.mean_independent
            );
            println!("{}", report.verdict);
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
