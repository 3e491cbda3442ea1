//! Analysis, masking and resynthesis of a synthetic utterance.
//!
//! `cargo run --example signal_roundtrip`

use metricgan::data::synth::{synthesize_pair, SynthConfig};
use metricgan::signal::{compute_features, enhance_frames, snr_db, FrameParams, Mask};
use ndarray::Array2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (clean, noisy, p) = synthesize_pair(&SynthConfig::default(), 0)?;
    let params = FrameParams::default();
    let (features, frames) = compute_features(&noisy, &params)?;
    let (t, f) = features.shape();
    println!("{}: {:.2} s at {} dB SNR -> {t} frames x {f} bins", p.id, noisy.duration_secs(), p.snr_db);

    let unit = enhance_frames(&frames, &Mask::ones(t, f), noisy.sample_rate())?;
    println!("unit mask reconstruction SNR: {:.1} dB", snr_db(noisy.samples(), unit.samples()));

    // Oracle ratio mask from the clean magnitude, floored like the networks.
    let (_, clean_frames) = compute_features(&clean, &params)?;
    let ratio = Array2::from_shape_fn((t, f), |(i, k)| {
        (clean_frames.magnitude[[i, k]] / frames.magnitude[[i, k]].max(1e-9)).clamp(0.05, 1.2)
    });
    let masked = enhance_frames(&frames, &Mask::new(ratio), noisy.sample_rate())?;
    println!(
        "SNR against clean: noisy {:.1} dB, ratio-masked {:.1} dB",
        snr_db(clean.samples(), noisy.samples()),
        snr_db(clean.samples(), masked.samples())
    );
    Ok(())
}
