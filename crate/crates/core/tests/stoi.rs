mod common;

use common::stoi_oracle::stoi_reference;
use metricgan::data::mix_at_snr;
use metricgan::data::synth::{noise, speech_proxy, synthesize_pair, NoiseKind, SynthConfig};
use metricgan::metrics::stoi;
use metricgan::signal::AudioSignal;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64, seconds: f64, kind: NoiseKind, snr: f64) -> (AudioSignal, AudioSignal) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = (seconds * 16_000.0) as usize;
    let clean = AudioSignal::new(speech_proxy(len, 16_000, &mut rng), 16_000).unwrap();
    let n = AudioSignal::new(noise(kind, len, 16_000, &mut rng), 16_000).unwrap();
    let m = mix_at_snr(&clean, &n, snr).unwrap();
    (m.clean, m.noisy)
}

#[test]
fn native_matches_reference_implementation() {
    let cases = [
        (NoiseKind::White, -10.0),
        (NoiseKind::Pink, -5.0),
        (NoiseKind::Babble, 0.0),
        (NoiseKind::White, 5.0),
        (NoiseKind::Pink, 20.0),
    ];
    for (k, (kind, snr)) in cases.into_iter().enumerate() {
        let (clean, noisy) = pair(k as u64, 1.2, kind, snr);
        let native = stoi(&noisy, &clean).unwrap().unclamped;
        let oracle = stoi_reference(clean.samples(), noisy.samples(), 16_000);
        assert!((native - oracle).abs() < 1e-3, "{kind:?} {snr} dB: {native} vs {oracle}");
    }
}

#[test]
fn native_matches_reference_at_ten_kilohertz() {
    let (clean, noisy) = pair(9, 1.0, NoiseKind::Pink, 0.0);
    let clean = clean.resampled(10_000);
    let noisy = noisy.resampled(10_000);
    let native = stoi(&noisy, &clean).unwrap().unclamped;
    let oracle = stoi_reference(clean.samples(), noisy.samples(), 10_000);
    assert!((native - oracle).abs() < 1e-6, "{native} vs {oracle}");
}

#[test]
fn identical_signals_score_one_and_scale_does_not_matter() {
    let (clean, noisy) = pair(4, 1.0, NoiseKind::White, 0.0);
    assert!((stoi(&clean, &clean).unwrap().value - 1.0).abs() < 1e-6);
    let a = stoi(&noisy, &clean).unwrap().value;
    let b = stoi(&noisy.scaled(3.7), &clean).unwrap().value;
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn short_input_is_rejected() {
    let (clean, noisy) = pair(1, 0.2, NoiseKind::White, 0.0);
    assert!(stoi(&noisy, &clean).is_err());
}

#[test]
fn synthetic_corpus_scores_rise_with_snr() {
    let config = SynthConfig {
        n_pairs: 36,
        min_duration: 1.0,
        max_duration: 1.0,
        snr_grid: vec![-5.0, 0.0, 5.0, 10.0],
        ..SynthConfig::default()
    };
    let mut by_snr = std::collections::BTreeMap::<i64, Vec<f64>>::new();
    for i in 0..config.n_pairs {
        let (clean, noisy, p) = synthesize_pair(&config, i).unwrap();
        by_snr
            .entry(p.snr_db.round() as i64)
            .or_default()
            .push(stoi(&noisy, &clean).unwrap().value);
    }
    let means: Vec<f64> = by_snr.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    assert_eq!(means.len(), 4);
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
}
