//! Replay buffer of previously processed utterances and their true scores.
//! The buffer only grows: each epoch adds `floor(H * I)` enhanced entries and,
//! with a de-generator, the same number of de-enhanced ones.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{replay_count, Mode};
use super::TrainError;
use crate::data::sample_indices;
use crate::metrics::NormalizedScore;
use crate::signal::{AudioSignal, FeatureMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Enhanced,
    DeEnhanced,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayEntry {
    pub processed_features: FeatureMatrix,
    pub clean_features: FeatureMatrix,
    pub true_score: NormalizedScore,
    pub origin: Origin,
    /// Identifier of the source utterance.
    pub utterance: String,
    /// Resynthesized processed audio the score was computed on.
    pub processed_audio: AudioSignal,
    pub clean_audio: AudioSignal,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplayBuffer {
    entries: Vec<ReplayEntry>,
}

impl ReplayBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ReplayEntry] {
        &self.entries
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.entries.iter().filter(|e| e.origin == origin).count()
    }
}

/// Result of one [`buffer_update`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BufferUpdate {
    pub added: usize,
    pub warning: Option<String>,
}

/// Appends `floor(h * i)` uniformly chosen enhanced items of `epoch_items`
/// (and as many de-enhanced items in `MgPlusMinus` mode) to `buffer`.
pub fn buffer_update(
    buffer: &mut ReplayBuffer,
    epoch_items: Vec<ReplayEntry>,
    h: f64,
    i: usize,
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<BufferUpdate, TrainError> {
    let per_origin = replay_count(h, i);
    let warning = (per_origin == 0 && h > 0.0).then(|| format!("H * I = {} < 1: nothing added to the replay buffer", h * i as f64));
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let mut origins = vec![Origin::Enhanced];
    if mode.has_degenerator() {
        origins.push(Origin::DeEnhanced);
    }
    if epoch_items.iter().any(|e| !origins.contains(&e.origin)) {
        return Err(TrainError::Config("de-enhanced replay entry in a run without de-generator".into()));
    }
    let mut pools: Vec<Vec<ReplayEntry>> = origins.iter().map(|_| Vec::new()).collect();
    for e in epoch_items {
        let k = origins.iter().position(|o| *o == e.origin).expect("checked above");
        pools[k].push(e);
    }
    let mut added = 0;
    for pool in pools {
        let chosen = sample_indices(pool.len(), per_origin, rng).map_err(TrainError::Data)?;
        let mut slots: Vec<Option<ReplayEntry>> = pool.into_iter().map(Some).collect();
        for idx in chosen {
            buffer.entries.push(slots[idx].take().expect("distinct indices"));
            added += 1;
        }
    }
    Ok(BufferUpdate { added, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn entry(origin: Origin, q: f64) -> ReplayEntry {
        let f = FeatureMatrix::from_values(Array2::zeros((2, 3))).unwrap();
        let a = AudioSignal::new(vec![0.0; 4], 16000).unwrap();
        ReplayEntry {
            processed_features: f.clone(),
            clean_features: f,
            true_score: NormalizedScore::new(q).unwrap(),
            origin,
            utterance: "u".into(),
            processed_audio: a.clone(),
            clean_audio: a,
        }
    }

    fn items(i: usize, mode: Mode) -> Vec<ReplayEntry> {
        let mut v: Vec<_> = (0..i).map(|k| entry(Origin::Enhanced, k as f64 / i as f64)).collect();
        if mode.has_degenerator() {
            v.extend((0..i).map(|_| entry(Origin::DeEnhanced, 0.5)));
        }
        v
    }

    #[test]
    fn growth_per_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (mode, per_epoch) in [(Mode::MgPlus, 20), (Mode::MgPlusMinus, 40)] {
            let mut b = ReplayBuffer::new();
            for epoch in 1..=3 {
                buffer_update(&mut b, items(100, mode), 0.2, 100, mode, &mut rng).unwrap();
                assert_eq!(b.len(), epoch * per_epoch);
            }
        }
    }

    #[test]
    fn zero_history_keeps_buffer_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = ReplayBuffer::new();
        let u = buffer_update(&mut b, items(10, Mode::MgPlus), 0.0, 10, Mode::MgPlus, &mut rng).unwrap();
        assert!(b.is_empty());
        assert!(u.warning.is_none());
        let u = buffer_update(&mut b, items(10, Mode::MgPlus), 0.05, 10, Mode::MgPlus, &mut rng).unwrap();
        assert!(b.is_empty());
        assert!(u.warning.is_some());
    }

    #[test]
    fn de_enhanced_entries_need_the_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = ReplayBuffer::new();
        assert!(buffer_update(&mut b, items(4, Mode::MgPlusMinus), 0.5, 4, Mode::MgPlus, &mut rng).is_err());
    }
}
