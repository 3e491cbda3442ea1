use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::metrics::MetricId;
use crate::models::{DiscrimConfig, MaskNetConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Generator and discriminator only.
    MgPlus,
    /// Adds the de-generator and its term in the discriminator loss.
    MgPlusMinus,
}

impl Mode {
    pub fn has_degenerator(self) -> bool {
        self == Mode::MgPlusMinus
    }
}

/// Everything that determines a training run. `generator.mask_floor` is the
/// mask floor for both mask networks; `learn_beta` makes the de-generator's
/// sigmoid scale trainable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: Mode,
    pub objective: MetricId,
    /// De-generator target score (ignored in `mg_plus` mode).
    pub w: f64,
    /// Share of each epoch's segments kept in the replay buffer.
    pub history_portion: f64,
    /// Segments sampled per epoch.
    pub segments_per_epoch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub learn_beta: bool,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (0: final checkpoint only).
    pub checkpoint_every: usize,
    pub generator: MaskNetConfig,
    pub discriminator: DiscrimConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::MgPlus,
            objective: MetricId::Pesq,
            w: 0.5,
            history_portion: 0.2,
            segments_per_epoch: 100,
            epochs: 750,
            learning_rate: 0.0005,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            learn_beta: false,
            seed: 1234,
            checkpoint_every: 0,
            generator: MaskNetConfig::default(),
            discriminator: DiscrimConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Checks ranges; returns warnings for accepted but unusual settings.
    pub fn validate(&self) -> Result<Vec<String>, TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        let mut warnings = Vec::new();
        if self.mode.has_degenerator() {
            if !(self.w > 0.0 && self.w <= 1.0) {
                return bad(format!("w must lie in (0, 1], got {}", self.w));
            }
            if self.w == 1.0 {
                warnings.push("w = 1 gives the de-generator the generator's objective".to_string());
            }
        }
        if !(0.0..=1.0).contains(&self.history_portion) {
            return bad(format!("history_portion must lie in [0, 1], got {}", self.history_portion));
        }
        if self.segments_per_epoch == 0 {
            return bad("segments_per_epoch must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || self.adam_epsilon <= 0.0 {
            return bad("Adam moment coefficients must lie in [0, 1) and epsilon must be positive".into());
        }
        let g = &self.generator;
        if !(g.beta > 0.0) {
            return bad(format!("sigmoid beta must be positive, got {}", g.beta));
        }
        if !(g.mask_floor >= 0.0 && g.mask_floor < g.beta) {
            return bad(format!("mask_floor must lie in [0, beta), got {}", g.mask_floor));
        }
        if let Some(c) = g.mask_ceiling {
            if c <= g.mask_floor {
                return bad("mask_ceiling must exceed mask_floor".into());
            }
        }
        if g.input_dim == 0 || g.lstm_layers == 0 || g.lstm_units == 0 || g.hidden_units == 0 {
            return bad("generator dimensions must be positive".into());
        }
        let d = &self.discriminator;
        if d.kernel.is_multiple_of(2) || d.conv_layers == 0 || d.channels == 0 {
            return bad("discriminator needs at least one layer, channels > 0 and an odd kernel".into());
        }
        if self.history_portion * (self.segments_per_epoch as f64) < 1.0 && self.history_portion > 0.0 {
            warnings.push(format!(
                "history_portion * segments_per_epoch = {} < 1: the replay buffer will stay empty",
                self.history_portion * self.segments_per_epoch as f64
            ));
        }
        Ok(warnings)
    }

    /// Architecture of the generator.
    pub fn generator_config(&self) -> MaskNetConfig {
        self.generator.clone()
    }

    /// Same architecture as the generator, with the sigmoid scale trainable
    /// when `learn_beta` is set.
    pub fn degenerator_config(&self) -> MaskNetConfig {
        MaskNetConfig {
            learn_beta: self.learn_beta || self.generator.learn_beta,
            ..self.generator.clone()
        }
    }

    /// Replay entries added per origin per epoch: `floor(H * I)`.
    pub fn replay_additions(&self) -> usize {
        replay_count(self.history_portion, self.segments_per_epoch)
    }
}

/// `floor(h * i)`, tolerant of representation error in `h` (0.29 * 100 is
/// 28.999999999999996 in binary floating point).
pub fn replay_count(h: f64, i: usize) -> usize {
    (h * i as f64 + 1e-9).floor() as usize
}
