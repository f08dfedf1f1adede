//! The full pipeline on a corpus built from scratch: synthesize WAV
//! files for three "speakers", extract features and pseudo-labels, then
//! rank the pseudo-labels by contamination index.
//!
//! Everything lands in a temp directory that is cleaned up on exit.

use std::fs;

use ci_select::config::RunConfig;
use ci_select::corpus::write_wav_int16;
use ci_select::pipeline::{cmd_ci, cmd_extract};
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let audio = dir.path().join("audio");
    fs::create_dir_all(&audio)?;

    // Each class is a "speaker" with its own pitch register and noise
    // floor; members vary slightly around that.
    let mut manifest = String::from("utterance_id,audio_path,class_label,start_s,end_s\n");
    for class in 0..3u64 {
        for member in 0..6u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 * class + member);
            let hz = 110.0 + 70.0 * class as f64 + 6.0 * member as f64;
            let noise = 0.02 + 0.03 * class as f32;
            let samples: Vec<f32> = (0..8000)
                .map(|i| {
                    let t = i as f64 / 16_000.0;
                    (0.5 * (2.0 * std::f64::consts::PI * hz * t).sin()) as f32
                        + rng.gen_range(-noise..noise)
                })
                .collect();
            let name = format!("speaker{class}-utt{member}");
            write_wav_int16(&audio.join(format!("{name}.wav")), &samples, 16_000)?;
            manifest.push_str(&format!("{name},audio/{name}.wav,speaker-{class},,\n"));
        }
    }
    let manifest_path = dir.path().join("manifest.csv");
    fs::write(&manifest_path, manifest)?;

    let cfg = RunConfig::default();
    let features = dir.path().join("features");
    let summary = cmd_extract(&manifest_path, &cfg, &features, false)?;
    println!("extracted {} utterances\n", summary.extracted);

    let report_path = dir.path().join("report.json");
    let report = cmd_ci(&manifest_path, &features, "all", &cfg, &report_path, None)?;

    println!("{:<6} {:<12} {:>10}", "rank", "pseudo-label", "CI");
    for entry in &report.entries {
        println!("{:<6} {:<12} {:>10.6}", entry.rank, entry.name, entry.ci);
    }
    println!("\nlow CI = little class information = safer self-supervision target");
    Ok(())
}
