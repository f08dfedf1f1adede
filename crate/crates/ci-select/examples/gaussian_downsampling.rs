//! Squeeze a variable-length feature sequence into a fixed number of
//! parts and look at the Gaussian weights doing the work.
//!
//! ```sh
//! cargo run --example gaussian_downsampling
//! ```

use ci_select::corpus::FeatureSequence;
use ci_select::embed::{gaussian_downsample, part_weights};

fn main() -> ci_select::Result<()> {
    // A 12-frame, 1-dimensional ramp: frame t holds the value t.
    let frames = 12;
    let data: Vec<f64> = (0..frames).map(|t| t as f64).collect();
    let seq = FeatureSequence::new("ramp", frames, 1, data, 0.010, 0.025)?;

    let n_parts = 4;
    let sigma = 0.07;
    let emb = gaussian_downsample(&seq, n_parts, sigma)?;

    println!("{} frames -> {} parts (sigma_gd = {sigma})", seq.rows, emb.parts);
    for k in 0..n_parts {
        let weights = part_weights(seq.rows, n_parts, sigma, k);
        let profile: Vec<String> = weights.iter().map(|w| format!("{w:.3}")).collect();
        println!(
            "part {k}: value {:+.4}  weights [{}] (sum {:.12})",
            emb.row(k)[0],
            profile.join(" "),
            weights.iter().sum::<f64>()
        );
    }

    // Constant sequences come through untouched, bit for bit.
    let constant = FeatureSequence::new("flat", 9, 2, vec![3.25; 18], 0.010, 0.025)?;
    let flat = gaussian_downsample(&constant, n_parts, sigma)?;
    println!(
        "constant 3.25 sequence stays exactly constant: {}",
        flat.data.iter().all(|&v| v == 3.25)
    );
    Ok(())
}
