//! STOI of a degraded recording against its reference, or of synthetic
//! mixtures over an SNR sweep when no files are given.
//!
//! `cargo run --example stoi_score -- clean.wav degraded.wav`

use metricgan::data::mix_at_snr;
use metricgan::data::synth::{noise, speech_proxy, NoiseKind};
use metricgan::metrics::stoi;
use metricgan::signal::{wav, AudioSignal};
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let [clean, deg] = args.as_slice() {
        let clean = wav::read(clean)?;
        let deg = wav::read(deg)?;
        let n = clean.len().min(deg.len());
        let score = stoi(&deg.truncated(n), &clean.truncated(n))?;
        println!("STOI {:.4} (unclamped {:.4})", score.value, score.unclamped);
        return Ok(());
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let clean = AudioSignal::new(speech_proxy(32_000, 16_000, &mut rng), 16_000)?;
    for kind in [NoiseKind::White, NoiseKind::Pink, NoiseKind::Babble] {
        let v = AudioSignal::new(noise(kind, 32_000, 16_000, &mut rng), 16_000)?;
        let row: Vec<String> = [-10.0, -5.0, 0.0, 5.0, 10.0, 20.0]
            .iter()
            .map(|&snr| {
                let m = mix_at_snr(&clean, &v, snr).expect("valid mixture");
                format!("{snr:>4} dB {:.3}", stoi(&m.noisy, &m.clean).expect("long enough").value)
            })
            .collect();
        println!("{kind:?}: {}", row.join(" | "));
    }
    Ok(())
}
