//! Extract all seven pseudo-labels from a synthesized utterance: half a
//! second of a 170 Hz tone, then half a second of noise.

use ci_select::config::RunConfig;
use ci_select::corpus::AudioBuffer;
use ci_select::dsp::{mel_spectrogram, stft_power};
use ci_select::pseudolabels::extract_all;
use rand::{Rng, SeedableRng};

fn main() -> ci_select::Result<()> {
    let sr = 16_000u32;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let samples: Vec<f32> = (0..sr as usize)
        .map(|i| {
            let t = i as f64 / sr as f64;
            if i < sr as usize / 2 {
                (0.6 * (2.0 * std::f64::consts::PI * 170.0 * t).sin()) as f32
            } else {
                rng.gen_range(-0.3f32..0.3)
            }
        })
        .collect();
    let buf = AudioBuffer { samples, sample_rate: sr };

    let cfg = RunConfig::default();
    let spec = stft_power(&buf, &cfg, "demo")?;
    let mel = mel_spectrogram(&spec, &cfg)?;
    let series = extract_all(&buf, &spec, &mel, &cfg)?;

    println!("{} frames of {} s audio\n", spec.frames, buf.duration_s());
    println!("{:<12} {:>12}  first frames", "pseudo-label", "utterance");
    for s in &series {
        let head: Vec<String> = s.framewise.iter().take(4).map(|v| format!("{v:+.3}")).collect();
        println!("{:<12} {:>12.4}  [{} ..]", s.label.name(), s.utterance_value, head.join(" "));
    }

    // The tone half is voiced and pitched; the noise half is not. Check
    // the voicing column frame by frame.
    let voicing = &series[2];
    let half = voicing.framewise.len() / 2;
    let front: f64 = voicing.framewise[..half].iter().sum::<f64>() / half as f64;
    let back: f64 =
        voicing.framewise[half..].iter().sum::<f64>() / (voicing.framewise.len() - half) as f64;
    println!("\nvoiced fraction: {front:.2} in the tone half, {back:.2} in the noise half");
    Ok(())
}
