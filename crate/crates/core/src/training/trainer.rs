use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::TrainConfig;
use super::loss::{loss_degenerator, loss_discriminator, loss_generator, DiscriminatorTerms};
use super::replay::{buffer_update, Origin, ReplayBuffer, ReplayEntry};
use super::TrainError;
use crate::data::{sample_indices, Utterance};
use crate::metrics::{MetricEvaluator, NormalizedScore};
use crate::models::{cast, Checkpoint, Discriminator, MaskNet, Parameterized};
use crate::signal::{compute_features, resynthesize_to_len, AudioSignal, FeatureMatrix, FrameParams, SpectralFrames};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    /// Discriminator on the current epoch's utterances.
    DiscriminatorCurrent,
    DiscriminatorReplay,
    /// Second discriminator pass on the current utterances.
    DiscriminatorRepeat,
    Degenerator,
    Generator,
}

/// One line of the history log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub epoch: usize,
    pub step: Step,
    /// Mean per-update loss, measured before each update.
    pub loss: f64,
    /// Mean true normalized score of the generator's outputs this epoch.
    pub mean_q_enh: f64,
    /// Same for the de-generator, when present.
    pub mean_q_deenh: Option<f64>,
    /// Mean true normalized score of the unprocessed noisy inputs.
    pub mean_q_noisy: f64,
    pub buffer_size: usize,
    /// Mean discriminator prediction on the processed inputs of this step.
    pub mean_pred: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Generator,
    Degenerator,
}

/// Per-utterance quantities reused across epochs.
struct Prepared {
    id: String,
    clean: AudioSignal,
    noisy_frames: SpectralFrames,
    noisy_mag: Array2<f32>,
    noisy_feat: Array2<f32>,
    clean_features: FeatureMatrix,
    clean_feat: Array2<f32>,
    q_noisy: Option<f64>,
}

/// A network output resynthesized and scored.
#[derive(Clone, Debug)]
pub struct Processed {
    pub features: FeatureMatrix,
    pub audio: AudioSignal,
    pub score: f64,
}

#[derive(Clone, Debug)]
pub struct SegmentTargets {
    pub index: usize,
    pub q_noisy: f64,
    pub enhanced: Processed,
    pub deenhanced: Option<Processed>,
}

/// The utterances of one epoch with their frozen-network outputs and scores.
#[derive(Clone, Debug)]
pub struct EpochBatch {
    pub indices: Vec<usize>,
    pub targets: Vec<SegmentTargets>,
}

impl EpochBatch {
    pub fn mean_q_enh(&self) -> f64 {
        mean(self.targets.iter().map(|t| t.enhanced.score))
    }

    pub fn mean_q_deenh(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.targets.iter().map(|t| t.deenhanced.as_ref().map(|d| d.score)).collect();
        v.map(|v| mean(v.into_iter()))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Networks, optimizer moments, replay buffer, epoch counter and RNG.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub generator: MaskNet<f32>,
    pub degenerator: Option<MaskNet<f32>>,
    pub discriminator: Discriminator<f32>,
    pub opt_generator: Adam<f32>,
    pub opt_degenerator: Option<Adam<f32>>,
    pub opt_discriminator: Adam<f32>,
    pub buffer: ReplayBuffer,
    pub epoch: usize,
    pub rng: ChaCha8Rng,
}

fn sub_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag)
}

impl TrainState {
    pub fn init(config: &TrainConfig) -> Self {
        let generator = MaskNet::init(config.generator_config(), sub_seed(config.seed, 1));
        let degenerator = config
            .mode
            .has_degenerator()
            .then(|| MaskNet::init(config.degenerator_config(), sub_seed(config.seed, 2)));
        let discriminator = Discriminator::init(config.discriminator.clone(), sub_seed(config.seed, 3));
        let (lr, b1, b2, eps) = (config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon);
        let opt_generator = Adam::new(&generator, lr, b1, b2, eps);
        let opt_degenerator = degenerator.as_ref().map(|n| Adam::new(n, lr, b1, b2, eps));
        let opt_discriminator = Adam::new(&discriminator, lr, b1, b2, eps);
        Self {
            generator,
            degenerator,
            discriminator,
            opt_generator,
            opt_degenerator,
            opt_discriminator,
            buffer: ReplayBuffer::new(),
            epoch: 0,
            rng: ChaCha8Rng::seed_from_u64(sub_seed(config.seed, 4)),
        }
    }
}

pub struct Trainer {
    pub config: TrainConfig,
    pub state: TrainState,
    evaluator: MetricEvaluator,
    params: FrameParams,
    data: Vec<Prepared>,
    history: Vec<HistoryRecord>,
}

fn to_f32(a: &Array2<f64>) -> Array2<f32> {
    a.mapv(|v| v as f32)
}

impl Trainer {
    /// Validates the configuration, checks that the objective metric can be
    /// computed, and precomputes spectra of the training utterances.
    pub fn new(config: TrainConfig, train_set: &[Utterance], evaluator: MetricEvaluator) -> Result<Self, TrainError> {
        for w in config.validate()? {
            log::warn!("{w}");
        }
        evaluator.require(&[config.objective]).map_err(|source| TrainError::Metric {
            utterance: String::new(),
            source,
        })?;
        if train_set.len() < config.segments_per_epoch {
            return Err(TrainError::Data(crate::data::DataError::TooFewSegments {
                requested: config.segments_per_epoch,
                available: train_set.len(),
            }));
        }
        let params = FrameParams::default();
        let min_frames = config.discriminator.kernel;
        let mut data = Vec::with_capacity(train_set.len());
        for u in train_set {
            let (noisy_features, noisy_frames) = compute_features(&u.noisy, &params)?;
            let (clean_features, _) = compute_features(&u.clean, &params)?;
            if noisy_frames.n_frames() < min_frames {
                return Err(TrainError::Config(format!(
                    "utterance `{}` has {} frames, the discriminator needs {min_frames}",
                    u.id,
                    noisy_frames.n_frames()
                )));
            }
            if noisy_frames.n_bins() != config.generator.input_dim {
                return Err(TrainError::Config(format!(
                    "generator input_dim {} does not match {} frequency bins",
                    config.generator.input_dim,
                    noisy_frames.n_bins()
                )));
            }
            data.push(Prepared {
                id: u.id.clone(),
                clean: u.clean.clone(),
                noisy_mag: to_f32(&noisy_frames.magnitude),
                noisy_feat: to_f32(noisy_features.values()),
                clean_feat: to_f32(clean_features.values()),
                clean_features,
                noisy_frames,
                q_noisy: None,
            });
        }
        let state = TrainState::init(&config);
        Ok(Self {
            config,
            state,
            evaluator,
            params,
            data,
            history: Vec::new(),
        })
    }

    pub fn history(&self) -> &[HistoryRecord] {
        &self.history
    }

    pub fn utterance_id(&self, index: usize) -> &str {
        &self.data[index].id
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn score(&self, deg: &AudioSignal, index: usize) -> Result<f64, TrainError> {
        let p = &self.data[index];
        self.evaluator
            .evaluate_pair(deg, &p.clean, self.config.objective)
            .map(|(_, q)| q.value())
            .map_err(|source| TrainError::Metric {
                utterance: p.id.clone(),
                source,
            })
    }

    fn q_noisy(&mut self, index: usize) -> Result<f64, TrainError> {
        if let Some(q) = self.data[index].q_noisy {
            return Ok(q);
        }
        let noisy = resynthesize_to_len(
            &self.data[index].noisy_frames.magnitude,
            &self.data[index].noisy_frames.phase,
            &self.params,
            self.data[index].clean.sample_rate(),
            self.data[index].clean.len(),
        )?;
        let q = self.score(&noisy, index)?;
        self.data[index].q_noisy = Some(q);
        Ok(q)
    }

    /// Runs `net` on utterance `index`, resynthesizes with the noisy phase and
    /// scores the result against the clean reference.
    fn process(&self, net: &MaskNet<f32>, index: usize) -> Result<Processed, TrainError> {
        let p = &self.data[index];
        let mask = net.forward(p.noisy_feat.view())?;
        let mut mag = p.noisy_frames.magnitude.clone();
        Zip::from(&mut mag).and(&mask).for_each(|m, &k| *m *= k as f64);
        let audio = resynthesize_to_len(&mag, &p.noisy_frames.phase, &self.params, p.clean.sample_rate(), p.clean.len())?;
        let score = self.score(&audio, index)?;
        Ok(Processed {
            features: FeatureMatrix::from_magnitude(&mag),
            audio,
            score,
        })
    }

    /// Outputs and true scores of the frozen mask networks on `indices`.
    pub fn prepare_batch(&mut self, indices: Vec<usize>) -> Result<EpochBatch, TrainError> {
        let mut targets = Vec::with_capacity(indices.len());
        for &index in &indices {
            let q_noisy = self.q_noisy(index)?;
            let enhanced = self.process(&self.state.generator, index)?;
            let deenhanced = match &self.state.degenerator {
                Some(n) => Some(self.process(n, index)?),
                None => None,
            };
            targets.push(SegmentTargets {
                index,
                q_noisy,
                enhanced,
                deenhanced,
            });
        }
        Ok(EpochBatch { indices, targets })
    }

    /// One discriminator update on `(deg, clean, target)` pairs; returns the
    /// pre-update predictions.
    fn discriminator_update(&mut self, pairs: &[(&Array2<f32>, &Array2<f32>, f64)]) -> Result<Vec<f64>, TrainError> {
        let d = &mut self.state.discriminator;
        d.power_iteration();
        let mut grads = d.zeros_like();
        let mut preds = Vec::with_capacity(pairs.len());
        for (deg, clean, target) in pairs {
            let (pred, cache) = d.forward_train(deg.view(), clean.view())?;
            let pred = pred as f64;
            d.backward(&cache, cast(2.0 * (pred - target)), Some(&mut grads), false);
            preds.push(pred);
        }
        self.state.opt_discriminator.step(d, &grads);
        Ok(preds)
    }

    fn non_finite(&self, step: Step, index: usize, detail: String) -> TrainError {
        let err = TrainError::NonFinite {
            epoch: self.state.epoch,
            step,
            utterance: self.data[index].id.clone(),
            detail,
        };
        log::error!("{err}");
        err
    }

    /// Discriminator pass over the batch (steps 1 and 3).
    pub fn train_discriminator_on_batch(&mut self, batch: &EpochBatch, step: Step) -> Result<HistoryRecord, TrainError> {
        let mut losses = Vec::with_capacity(batch.targets.len());
        let mut preds_enh = Vec::with_capacity(batch.targets.len());
        for t in &batch.targets {
            let enh = to_f32(t.enhanced.features.values());
            let de = t.deenhanced.as_ref().map(|d| to_f32(d.features.values()));
            let p = &self.data[t.index];
            let (clean, noisy) = (p.clean_feat.clone(), p.noisy_feat.clone());
            let mut pairs = vec![(&clean, &clean, 1.0), (&enh, &clean, t.enhanced.score), (&noisy, &clean, t.q_noisy)];
            if let (Some(f), Some(d)) = (&de, &t.deenhanced) {
                pairs.push((f, &clean, d.score));
            }
            let preds = self.discriminator_update(&pairs)?;
            let terms = DiscriminatorTerms {
                pred_clean: preds[0],
                pred_enh: preds[1],
                pred_noisy: preds[2],
                q_enh: t.enhanced.score,
                q_noisy: t.q_noisy,
                deenh: t.deenhanced.as_ref().map(|d| (preds[3], d.score)),
            };
            let loss = loss_discriminator(&terms)?;
            if !loss.is_finite() {
                return Err(self.non_finite(step, t.index, format!("discriminator terms {terms:?}")));
            }
            losses.push(loss);
            preds_enh.push(preds[1]);
        }
        self.check_params(step, batch.indices[0])?;
        Ok(self.record(step, batch, mean(losses.into_iter()), mean(preds_enh.into_iter())))
    }

    /// Scored outputs of the batch as replay candidates.
    pub fn replay_candidates(&self, batch: &EpochBatch) -> Vec<ReplayEntry> {
        let mut out = Vec::new();
        for t in &batch.targets {
            let p = &self.data[t.index];
            let mut push = |proc: &Processed, origin| {
                out.push(ReplayEntry {
                    processed_features: proc.features.clone(),
                    clean_features: p.clean_features.clone(),
                    true_score: NormalizedScore::new(proc.score).expect("normalized scores lie in [0, 1]"),
                    origin,
                    utterance: p.id.clone(),
                    processed_audio: proc.audio.clone(),
                    clean_audio: p.clean.clone(),
                })
            };
            push(&t.enhanced, Origin::Enhanced);
            if let Some(d) = &t.deenhanced {
                push(d, Origin::DeEnhanced);
            }
        }
        out
    }

    /// One shuffled pass over the replay buffer (filled by previous epochs) with the `(pred - Q')^2` term.
    pub fn train_discriminator_on_replay(&mut self, batch: &EpochBatch) -> Result<HistoryRecord, TrainError> {
        let mut order: Vec<usize> = (0..self.state.buffer.len()).collect();
        order.shuffle(&mut self.state.rng);
        let mut losses = Vec::with_capacity(order.len());
        let mut preds = Vec::with_capacity(order.len());
        for k in order {
            let e = &self.state.buffer.entries()[k];
            let deg = to_f32(e.processed_features.values());
            let clean = to_f32(e.clean_features.values());
            let q = e.true_score.value();
            let pred = self.discriminator_update(&[(&deg, &clean, q)])?[0];
            let loss = (pred - q).powi(2);
            if !loss.is_finite() {
                let utterance = self.state.buffer.entries()[k].utterance.clone();
                let err = TrainError::NonFinite {
                    epoch: self.state.epoch,
                    step: Step::DiscriminatorReplay,
                    utterance,
                    detail: format!("replay entry {k}: prediction {pred}, target {q}"),
                };
                log::error!("{err}");
                return Err(err);
            }
            losses.push(loss);
            preds.push(pred);
        }
        Ok(self.record(Step::DiscriminatorReplay, batch, mean(losses.into_iter()), mean(preds.into_iter())))
    }

    /// Trains a mask network on the batch utterances through the frozen
    /// discriminator, towards predicted score 1 (generator) or `w`.
    pub fn train_mask_network(&mut self, role: Role, batch: &EpochBatch) -> Result<HistoryRecord, TrainError> {
        let (target, step) = match role {
            Role::Generator => (1.0, Step::Generator),
            Role::Degenerator => (self.config.w, Step::Degenerator),
        };
        let mut losses = Vec::with_capacity(batch.indices.len());
        let mut preds = Vec::with_capacity(batch.indices.len());
        for &index in &batch.indices {
            let TrainState {
                generator,
                degenerator,
                discriminator,
                opt_generator,
                opt_degenerator,
                ..
            } = &mut self.state;
            let (net, opt) = match role {
                Role::Generator => (generator, opt_generator),
                Role::Degenerator => match (degenerator.as_mut(), opt_degenerator.as_mut()) {
                    (Some(n), Some(o)) => (n, o),
                    _ => return Err(TrainError::Config("no de-generator in this mode".into())),
                },
            };
            let p = &self.data[index];
            let (mask, cache) = net.forward_train(p.noisy_feat.view())?;
            let mag = &mask * &p.noisy_mag;
            let feat = mag.mapv(f32::ln_1p);
            let (pred, d_cache) = discriminator.forward_train(feat.view(), p.clean_feat.view())?;
            let pred = pred as f64;
            let loss = match role {
                Role::Generator => loss_generator(pred),
                Role::Degenerator => loss_degenerator(pred, target),
            };
            if !loss.is_finite() {
                return Err(self.non_finite(step, index, format!("prediction {pred}")));
            }
            let d_feat = discriminator
                .backward(&d_cache, cast(2.0 * (pred - target)), None, true)
                .expect("input gradient requested");
            // d log(1 + m x) / dm = x / (1 + m x)
            let mut d_mask = d_feat;
            Zip::from(&mut d_mask)
                .and(&p.noisy_mag)
                .and(&mag)
                .for_each(|d, &x, &y| *d *= x / (1.0 + y));
            let mut grads = net.zeros_like();
            net.backward(&cache, &d_mask, &mut grads);
            opt.step(net, &grads);
            losses.push(loss);
            preds.push(pred);
        }
        self.check_params(step, batch.indices[0])?;
        Ok(self.record(step, batch, mean(losses.into_iter()), mean(preds.into_iter())))
    }

    fn check_params(&self, step: Step, index: usize) -> Result<(), TrainError> {
        let s = &self.state;
        let ok = s.generator.all_finite()
            && s.discriminator.all_finite()
            && s.degenerator.as_ref().is_none_or(|n| n.all_finite());
        if ok {
            Ok(())
        } else {
            Err(self.non_finite(step, index, "parameters became non-finite".into()))
        }
    }

    fn record(&self, step: Step, batch: &EpochBatch, loss: f64, mean_pred: f64) -> HistoryRecord {
        HistoryRecord {
            epoch: self.state.epoch,
            step,
            loss,
            mean_q_enh: batch.mean_q_enh(),
            mean_q_deenh: batch.mean_q_deenh(),
            mean_q_noisy: mean(batch.targets.iter().map(|t| t.q_noisy)),
            buffer_size: self.state.buffer.len(),
            mean_pred,
        }
    }

    /// Runs one full epoch and returns its history records.
    pub fn run_epoch(&mut self) -> Result<Vec<HistoryRecord>, TrainError> {
        self.state.epoch += 1;
        let i = self.config.segments_per_epoch;
        let indices = sample_indices(self.data.len(), i, &mut self.state.rng)?;
        let batch = self.prepare_batch(indices)?;
        let mut records = vec![self.train_discriminator_on_batch(&batch, Step::DiscriminatorCurrent)?];
        let candidates = self.replay_candidates(&batch);
        records.push(self.train_discriminator_on_replay(&batch)?);
        records.push(self.train_discriminator_on_batch(&batch, Step::DiscriminatorRepeat)?);
        if self.state.degenerator.is_some() {
            records.push(self.train_mask_network(Role::Degenerator, &batch)?);
        }
        records.push(self.train_mask_network(Role::Generator, &batch)?);
        buffer_update(
            &mut self.state.buffer,
            candidates,
            self.config.history_portion,
            i,
            self.config.mode,
            &mut self.state.rng,
        )?;
        self.history.extend(records.iter().cloned());
        Ok(records)
    }

    /// Snapshot of all networks with the configuration.
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_networks(
            &self.state.generator,
            self.state.degenerator.as_ref(),
            &self.state.discriminator,
            serde_json::to_value(&self.config).expect("config serializes"),
            self.state.epoch,
        )
    }
}

/// Outcome of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: Vec<HistoryRecord>,
    /// Paths of written checkpoints, in order (empty without `out_dir`).
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: Checkpoint,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Trains for `config.epochs` epochs. With `out_dir`, appends one JSON line
/// per history record to `history.jsonl` and writes checkpoints there.
pub fn train(
    config: TrainConfig,
    train_set: &[Utterance],
    evaluator: MetricEvaluator,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    let mut trainer = Trainer::new(config, train_set, evaluator)?;
    let mut log_file = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_error(dir))?;
            let path = dir.join("history.jsonl");
            Some((fs::File::create(&path).map_err(io_error(&path))?, path))
        }
        None => None,
    };
    let mut checkpoints = Vec::new();
    let epochs = trainer.config.epochs;
    let every = trainer.config.checkpoint_every;
    for epoch in 1..=epochs {
        let records = trainer.run_epoch()?;
        for r in &records {
            log::info!(
                "epoch {} {:?}: loss {:.5} pred {:.4} q_enh {:.4} buffer {}",
                r.epoch,
                r.step,
                r.loss,
                r.mean_pred,
                r.mean_q_enh,
                r.buffer_size
            );
        }
        if let Some((file, path)) = log_file.as_mut() {
            for r in &records {
                let line = serde_json::to_string(r).expect("records serialize");
                writeln!(file, "{line}").map_err(io_error(path))?;
            }
        }
        let due = epoch == epochs || (every > 0 && epoch % every == 0);
        if let (Some(dir), true) = (out_dir, due) {
            let ck = trainer.checkpoint();
            let path = dir.join(ck.file_name());
            ck.save(&path)?;
            checkpoints.push(path);
        }
    }
    Ok(TrainOutcome {
        history: trainer.history.clone(),
        checkpoints,
        final_checkpoint: trainer.checkpoint(),
    })
}
