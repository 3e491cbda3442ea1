//! Adversarial training of the generator, the optional de-generator and the
//! metric discriminator.
//!
//! One epoch:
//!
//! 1. sample `I` training utterances; run the (frozen) generator and
//!    de-generator on them, resynthesize, and score the outputs with the true
//!    metric; train the discriminator on each utterance's clean, enhanced,
//!    noisy (and de-enhanced) pairs;
//! 2. train the discriminator over one shuffled pass of the replay buffer;
//! 3. repeat the first discriminator pass on the same utterances;
//! 4. train the de-generator towards predicted score `w` (if present);
//! 5. train the generator towards predicted score 1;
//! 6. move `floor(H * I)` of the outputs scored in step 1 into the replay
//!    buffer, per origin.
//!
//! Every optimization step uses one utterance. Training runs in `f32` on a
//! single thread and is bit-reproducible under a fixed seed.

pub mod adam;
pub mod config;
pub mod loss;
pub mod regress;
pub mod replay;
mod trainer;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::data::DataError;
use crate::metrics::MetricError;
use crate::models::{CheckpointError, ModelError};
use crate::signal::SignalError;

pub use adam::Adam;
pub use config::{replay_count, Mode, TrainConfig};
pub use loss::{loss_degenerator, loss_discriminator, loss_generator, DiscriminatorTerms};
pub use regress::{regression_epoch, regression_mse, RegressionSample};
pub use replay::{buffer_update, BufferUpdate, Origin, ReplayBuffer, ReplayEntry};
pub use trainer::{train, EpochBatch, HistoryRecord, Role, Step, TrainOutcome, TrainState, Trainer};

#[derive(Error, Debug)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("metric failed on `{utterance}`: {source}")]
    Metric { utterance: String, source: MetricError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("non-finite value in epoch {epoch}, step {step:?}, utterance `{utterance}`: {detail}")]
    NonFinite {
        epoch: usize,
        step: Step,
        utterance: String,
        detail: String,
    },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl TrainError {
    /// True when a required external metric could not be run.
    pub fn is_metric_unavailable(&self) -> bool {
        matches!(
            self,
            TrainError::Metric {
                source: MetricError::Unavailable { .. },
                ..
            }
        )
    }
}
