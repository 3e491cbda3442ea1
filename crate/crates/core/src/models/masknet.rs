//! Recurrent mask estimator: stacked bidirectional LSTMs, a leaky-rectified
//! dense layer and a dense layer with the learnable sigmoid, followed by a
//! lower clamp of the mask at `mask_floor`.

use ndarray::{Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Zip};
use serde::{Deserialize, Serialize};

use super::activation::{leaky_relu, leaky_relu_backward, LearnableSigmoid};
use super::dense::Dense;
use super::lstm::{BiLstm, BiLstmCache};
use super::{cast, init_rng, Mask, ModelError, Parameterized, Real, Stateful};
use crate::signal::FeatureMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskNetConfig {
    pub input_dim: usize,
    pub lstm_units: usize,
    pub lstm_layers: usize,
    pub hidden_units: usize,
    pub leaky_slope: f64,
    /// Initial (or fixed) sigmoid scale.
    pub beta: f64,
    pub learn_beta: bool,
    pub mask_floor: f64,
    /// Optional upper clamp; off by default so that `beta > 1` has effect.
    pub mask_ceiling: Option<f64>,
}

impl Default for MaskNetConfig {
    fn default() -> Self {
        Self {
            input_dim: 257,
            lstm_units: 200,
            lstm_layers: 2,
            hidden_units: 300,
            leaky_slope: 0.3,
            beta: 1.2,
            learn_beta: false,
            mask_floor: 0.05,
            mask_ceiling: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskNet<R: Real> {
    pub config: MaskNetConfig,
    pub lstm: Vec<BiLstm<R>>,
    pub hidden: Dense<R>,
    pub output: Dense<R>,
    pub activation: LearnableSigmoid<R>,
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct MaskNetCache<R: Real> {
    lstm: Vec<BiLstmCache<R>>,
    lstm_out: Array2<R>,
    hidden_pre: Array2<R>,
    hidden_act: Array2<R>,
    out_pre: Array2<R>,
    unclamped: Array2<R>,
}

impl<R: Real> MaskNet<R> {
    pub fn init(config: MaskNetConfig, seed: u64) -> Self {
        let mut rng = init_rng(seed);
        let mut lstm = Vec::with_capacity(config.lstm_layers);
        let mut inputs = config.input_dim;
        for _ in 0..config.lstm_layers {
            lstm.push(BiLstm::init(inputs, config.lstm_units, &mut rng));
            inputs = 2 * config.lstm_units;
        }
        let hidden = Dense::init(inputs, config.hidden_units, &mut rng);
        let output = Dense::init(config.hidden_units, config.input_dim, &mut rng);
        let activation = LearnableSigmoid::new(config.input_dim, config.beta, config.learn_beta);
        Self {
            config,
            lstm,
            hidden,
            output,
            activation,
        }
    }

    /// Same architecture with every trainable array zeroed, for use as a
    /// gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    fn check(&self, features: &ArrayView2<'_, R>) -> Result<(), ModelError> {
        if features.ncols() != self.config.input_dim {
            return Err(ModelError::FeatureWidth {
                expected: self.config.input_dim,
                got: features.ncols(),
            });
        }
        if features.nrows() == 0 {
            return Err(ModelError::TooFewFrames {
                frames: 0,
                required: 1,
            });
        }
        Ok(())
    }

    fn clamp(&self, unclamped: &Array2<R>) -> Array2<R> {
        let floor: R = cast(self.config.mask_floor);
        let ceiling = self.config.mask_ceiling.map(cast::<R>);
        unclamped.mapv(|m| {
            let m = m.max(floor);
            match ceiling {
                Some(c) => m.min(c),
                None => m,
            }
        })
    }

    pub fn forward(&self, features: ArrayView2<'_, R>) -> Result<Array2<R>, ModelError> {
        Ok(self.forward_train(features)?.0)
    }

    pub fn forward_train(&self, features: ArrayView2<'_, R>) -> Result<(Array2<R>, MaskNetCache<R>), ModelError> {
        self.check(&features)?;
        let slope: R = cast(self.config.leaky_slope);
        let mut caches = Vec::with_capacity(self.lstm.len());
        let mut x = features.to_owned();
        for layer in &self.lstm {
            let (y, cache) = layer.forward(x.view());
            caches.push(cache);
            x = y;
        }
        let hidden_pre = self.hidden.forward(x.view());
        let hidden_act = leaky_relu(&hidden_pre, slope);
        let out_pre = self.output.forward(hidden_act.view());
        let unclamped = self.activation.forward(out_pre.view());
        let mask = self.clamp(&unclamped);
        Ok((
            mask,
            MaskNetCache {
                lstm: caches,
                lstm_out: x,
                hidden_pre,
                hidden_act,
                out_pre,
                unclamped,
            },
        ))
    }

    /// Accumulates `dL/dparams` into `grads` given `dL/dmask`.
    pub fn backward(&self, cache: &MaskNetCache<R>, d_mask: &Array2<R>, grads: &mut Self) {
        let slope: R = cast(self.config.leaky_slope);
        let floor: R = cast(self.config.mask_floor);
        let ceiling = self.config.mask_ceiling.map(cast::<R>);
        // clamped entries pass no gradient
        let mut d_unclamped = d_mask.clone();
        Zip::from(&mut d_unclamped).and(&cache.unclamped).for_each(|d, &m| {
            if m < floor || ceiling.is_some_and(|c| m > c) {
                *d = R::zero();
            }
        });
        let d_out_pre = self
            .activation
            .backward(cache.out_pre.view(), &d_unclamped, &mut grads.activation);
        let mut d_hidden = self
            .output
            .backward(cache.hidden_act.view(), &d_out_pre, Some(&mut grads.output));
        leaky_relu_backward(&mut d_hidden, &cache.hidden_pre, slope);
        let mut d_x = self
            .hidden
            .backward(cache.lstm_out.view(), &d_hidden, Some(&mut grads.hidden));
        for (i, layer) in self.lstm.iter().enumerate().rev() {
            d_x = layer.backward(&cache.lstm[i], d_x.view(), &mut grads.lstm[i]);
        }
    }

    /// Converts to another precision.
    pub fn cast<S: Real>(&self) -> MaskNet<S> {
        let mut out = MaskNet::<S>::init(self.config.clone(), 0);
        let mut values = Vec::new();
        self.visit_state(&mut |_, a| values.push(a.iter().map(|v| cast::<S>(v.to_f64_lossless())).collect::<Vec<_>>()));
        let mut it = values.into_iter();
        out.visit_state_mut(&mut |_, mut a| {
            for (d, s) in a.iter_mut().zip(it.next().expect("same layout")) {
                *d = s;
            }
        });
        out
    }
}

impl<R: Real> Parameterized<R> for MaskNet<R> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, R>)) {
        for (i, l) in self.lstm.iter().enumerate() {
            l.visit(&format!("lstm{i}"), f);
        }
        self.hidden.visit("hidden", f);
        self.output.visit("output", f);
        self.activation.visit("sigmoid", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, R>)) {
        for (i, l) in self.lstm.iter_mut().enumerate() {
            l.visit_mut(&format!("lstm{i}"), f);
        }
        self.hidden.visit_mut("hidden", f);
        self.output.visit_mut("output", f);
        self.activation.visit_mut("sigmoid", f);
    }
}

impl<R: Real> Stateful<R> for MaskNet<R> {
    fn visit_state(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, R>)) {
        let learn_beta = self.activation.learn_beta;
        self.visit_params(f);
        if !learn_beta {
            f("sigmoid.beta", self.activation.beta.view().into_dyn());
        }
    }

    fn visit_state_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, R>)) {
        let learn_beta = self.activation.learn_beta;
        self.visit_params_mut(f);
        if !learn_beta {
            f("sigmoid.beta", self.activation.beta.view_mut().into_dyn());
        }
    }
}

/// Mask for a feature matrix, evaluated at the network's precision.
pub fn mask_forward<R: Real>(net: &MaskNet<R>, features: &FeatureMatrix) -> Result<Mask, ModelError> {
    let x = features.values().mapv(cast::<R>);
    let m = net.forward(x.view())?;
    Ok(Mask::new(m.mapv(|v| v.to_f64_lossless())))
}
