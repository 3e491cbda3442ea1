//! Small corpora and configurations for integration tests.

use metricgan::data::synth::{synthesize_pair, NoiseKind, SynthConfig};
use metricgan::data::Utterance;
use metricgan::metrics::MetricId;
use metricgan::models::{DiscrimConfig, MaskNetConfig};
use metricgan::training::{Mode, TrainConfig};

/// `n` in-memory pairs of `seconds` each.
pub fn utterances(n: usize, seconds: f64, seed: u64) -> Vec<Utterance> {
    let config = SynthConfig {
        n_pairs: n,
        min_duration: seconds,
        max_duration: seconds,
        snr_grid: vec![-5.0, 0.0, 5.0],
        noise_kinds: vec![NoiseKind::White, NoiseKind::Pink],
        seed,
        ..SynthConfig::default()
    };
    (0..n)
        .map(|i| {
            let (clean, noisy, p) = synthesize_pair(&config, i).unwrap();
            Utterance {
                id: p.id,
                clean,
                noisy,
                snr_db: Some(p.snr_db),
            }
        })
        .collect()
}

/// Narrow networks so that a handful of epochs run in seconds.
pub fn tiny_config(mode: Mode, segments: usize, history: f64) -> TrainConfig {
    TrainConfig {
        mode,
        objective: MetricId::Stoi,
        w: 0.5,
        history_portion: history,
        segments_per_epoch: segments,
        epochs: 2,
        seed: 11,
        generator: MaskNetConfig {
            lstm_units: 8,
            hidden_units: 8,
            lstm_layers: 1,
            ..MaskNetConfig::default()
        },
        discriminator: DiscrimConfig {
            channels: 4,
            conv_layers: 2,
            dense_units: vec![8],
            ..DiscrimConfig::default()
        },
        ..TrainConfig::default()
    }
}
