//! Inference, test-set evaluation, spectrogram export and the configuration
//! surface shared by the command-line tool and the examples.

pub mod config;
pub mod report;
pub mod spectrogram;

use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{DataError, Utterance};
use crate::metrics::{MetricError, MetricEvaluator, MetricId};
use crate::models::{mask_forward, Checkpoint, CheckpointError, MaskNet, ModelError};
use crate::signal::{compute_features, resynthesize_to_len, wav, AudioSignal, FrameParams, Mask, SignalError};
use crate::training::TrainError;

pub use config::{AppConfig, ConfigError};
pub use report::{EvalReport, EvalRow, ReportSnapshot};
pub use spectrogram::{export_spectrograms, ExportedMatrix};

#[derive(Error, Debug)]
pub enum EvalError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("image export failed: {0}")]
    Image(String),
}

/// Process exit codes of the command-line tool.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const METRIC_UNAVAILABLE: i32 = 4;
}

impl EvalError {
    pub fn exit_code(&self) -> i32 {
        use crate::training::TrainError as T;
        match self {
            EvalError::Config(_) => exit_code::CONFIG,
            EvalError::Data(_) => exit_code::DATA,
            EvalError::Metric(MetricError::Unavailable { .. }) => exit_code::METRIC_UNAVAILABLE,
            EvalError::Train(e) if e.is_metric_unavailable() => exit_code::METRIC_UNAVAILABLE,
            EvalError::Train(T::Config(_)) => exit_code::CONFIG,
            EvalError::Train(T::Data(_)) => exit_code::DATA,
            _ => exit_code::OTHER,
        }
    }
}

pub fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Which mask network of a checkpoint to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generator,
    DeGenerator,
}

/// A mask estimator for inference: a trained network or the identity mask.
#[derive(Clone, Debug)]
pub enum Enhancer {
    Network(Box<MaskNet<f32>>),
    /// Unit mask; reproduces the noisy input (the "Noisy" baseline row).
    Passthrough,
}

impl Enhancer {
    pub fn from_checkpoint(checkpoint: &Checkpoint, role: Role) -> Result<Self, EvalError> {
        let net = match role {
            Role::Generator => checkpoint.generator::<f32>()?,
            Role::DeGenerator => checkpoint.degenerator::<f32>()?,
        };
        Ok(Enhancer::Network(Box::new(net)))
    }

    pub fn load(path: impl AsRef<Path>, role: Role) -> Result<Self, EvalError> {
        Self::from_checkpoint(&Checkpoint::load(path)?, role)
    }

    /// Mask for the noisy features (`T x F`).
    pub fn mask(&self, features: &crate::signal::FeatureMatrix) -> Result<Mask, EvalError> {
        match self {
            Enhancer::Network(net) => Ok(mask_forward(net, features)?),
            Enhancer::Passthrough => {
                let (t, f) = features.shape();
                Ok(Mask::ones(t, f))
            }
        }
    }

    /// Features, mask, masking with the noisy phase and overlap-add; the
    /// output has the input's length.
    pub fn enhance_signal(&self, noisy: &AudioSignal) -> Result<AudioSignal, EvalError> {
        let params = FrameParams::default();
        let (features, frames) = compute_features(noisy, &params)?;
        let mask = self.mask(&features)?;
        let magnitude = crate::signal::apply_mask(&mask, &frames.magnitude)?;
        Ok(resynthesize_to_len(
            &magnitude,
            &frames.phase,
            &params,
            noisy.sample_rate(),
            noisy.len(),
        )?)
    }
}

/// Enhances (or de-enhances, with [`Role::DeGenerator`]) one WAV file.
pub fn enhance_file(checkpoint: &Checkpoint, input: &Path, output: &Path, role: Role) -> Result<(), EvalError> {
    let enhancer = Enhancer::from_checkpoint(checkpoint, role)?;
    let noisy = read_pipeline_wav(input)?;
    let out = enhancer.enhance_signal(&noisy)?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    wav::write(output, &out)?;
    Ok(())
}

/// Reads a WAV file and resamples it to the pipeline rate.
pub fn read_pipeline_wav(path: &Path) -> Result<AudioSignal, EvalError> {
    let signal = wav::read(path)?;
    Ok(if signal.sample_rate() == crate::signal::DEFAULT_SAMPLE_RATE {
        signal
    } else {
        signal.resampled(crate::signal::DEFAULT_SAMPLE_RATE)
    })
}

/// Enhances every pair of `test_set` and scores it with each metric in
/// `metrics`. Utterances are processed in parallel; rows keep the input
/// order. A metric failure on one utterance marks that cell failed.
pub fn evaluate_testset(
    enhancer: &Enhancer,
    test_set: &[Utterance],
    metrics: &[MetricId],
    evaluator: &MetricEvaluator,
    snapshot: ReportSnapshot,
) -> Result<EvalReport, EvalError> {
    if test_set.is_empty() {
        return Err(EvalError::Data(DataError::TooFewSegments {
            requested: 1,
            available: 0,
        }));
    }
    evaluator.require(metrics)?;
    let rows: Result<Vec<EvalRow>, EvalError> = test_set
        .par_iter()
        .map(|u| {
            let enhanced = enhancer.enhance_signal(&u.noisy)?;
            let scores = metrics
                .iter()
                .map(|&m| {
                    evaluator.raw(&enhanced, &u.clean, m).map_err(|e| {
                        log::warn!("{m} failed on `{}`: {e}", u.id);
                        e.to_string()
                    })
                })
                .collect();
            Ok(EvalRow {
                id: u.id.clone(),
                scores,
            })
        })
        .collect();
    Ok(EvalReport::new(metrics.to_vec(), rows?, snapshot))
}
