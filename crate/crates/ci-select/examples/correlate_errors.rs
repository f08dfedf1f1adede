//! Rank-correlate the bundled phone-task scores with their downstream
//! error rates. A high Spearman rho means CI is a useful proxy for
//! picking pretext tasks without training anything.

use std::path::Path;

use ci_select::pipeline::cmd_correlate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let out = std::env::temp_dir().join("ci-select-correlation.json");

    let result = cmd_correlate(
        &fixtures.join("phone_task_report.json"),
        &fixtures.join("phone_task_errors.csv"),
        &out,
    )?;

    println!("{:<12} {:>6} {:>8}", "pseudo-label", "CI", "error");
    for pair in &result.pairs {
        println!("{:<12} {:>6.2} {:>8.2}", pair.name, pair.ci, pair.error);
    }
    println!(
        "\nspearman rho = {:.6}, kendall tau = {:.6} over {} pairs",
        result.spearman_rho, result.kendall_tau, result.n
    );
    println!("full result written to {}", out.display());
    Ok(())
}
