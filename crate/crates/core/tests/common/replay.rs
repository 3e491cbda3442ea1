//! Placeholder replay entries for buffer arithmetic.

use metricgan::metrics::NormalizedScore;
use metricgan::signal::{AudioSignal, FeatureMatrix};
use metricgan::training::{Mode, Origin, ReplayEntry};
use ndarray::Array2;

fn entry(origin: Origin, k: usize) -> ReplayEntry {
    let f = FeatureMatrix::from_values(Array2::zeros((2, 3))).unwrap();
    let a = AudioSignal::new(vec![0.0; 4], 16_000).unwrap();
    ReplayEntry {
        processed_features: f.clone(),
        clean_features: f,
        true_score: NormalizedScore::new(0.5).unwrap(),
        origin,
        utterance: format!("u{k}"),
        processed_audio: a.clone(),
        clean_audio: a,
    }
}

/// One enhanced entry per segment, plus one de-enhanced entry in +/- mode.
pub fn entries(segments: usize, mode: Mode) -> Vec<ReplayEntry> {
    let mut v: Vec<_> = (0..segments).map(|k| entry(Origin::Enhanced, k)).collect();
    if mode.has_degenerator() {
        v.extend((0..segments).map(|k| entry(Origin::DeEnhanced, k)));
    }
    v
}
