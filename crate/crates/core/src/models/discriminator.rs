//! Metric predictor: the degraded and reference feature matrices are stacked
//! as two input channels, passed through leaky-rectified 2-D convolutions,
//! averaged over time and frequency, and mapped to one unbounded score by a
//! small dense stack (no activation on the last layer).

use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use serde::{Deserialize, Serialize};

use super::activation::{leaky_relu, leaky_relu_backward};
use super::conv::Conv2d;
use super::dense::Dense;
use super::{cast, init_rng, ModelError, Parameterized, Real, Stateful};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscrimConfig {
    pub channels: usize,
    pub conv_layers: usize,
    pub kernel: usize,
    pub dense_units: Vec<usize>,
    pub leaky_slope: f64,
    pub spectral_norm: bool,
}

impl Default for DiscrimConfig {
    fn default() -> Self {
        Self {
            channels: 15,
            conv_layers: 4,
            kernel: 5,
            dense_units: vec![50, 10],
            leaky_slope: 0.3,
            spectral_norm: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator<R: Real> {
    pub config: DiscrimConfig,
    pub convs: Vec<Conv2d<R>>,
    /// Hidden layers followed by the scalar output layer.
    pub dense: Vec<Dense<R>>,
}

#[derive(Clone, Debug)]
pub struct DiscrimCache<R: Real> {
    frames: usize,
    bins: usize,
    conv_inputs: Vec<Array2<R>>,
    conv_pres: Vec<Array2<R>>,
    dense_inputs: Vec<Array2<R>>,
    dense_pres: Vec<Array2<R>>,
}

impl<R: Real> Discriminator<R> {
    pub fn init(config: DiscrimConfig, seed: u64) -> Self {
        let mut rng = init_rng(seed);
        let mut convs = Vec::with_capacity(config.conv_layers);
        let mut c_in = 2;
        for _ in 0..config.conv_layers {
            convs.push(Conv2d::init(c_in, config.channels, config.kernel, config.spectral_norm, &mut rng));
            c_in = config.channels;
        }
        let mut dense = Vec::new();
        let mut n_in = c_in;
        for &units in config.dense_units.iter().chain(std::iter::once(&1)) {
            dense.push(Dense::init(n_in, units, &mut rng));
            n_in = units;
        }
        Self { config, convs, dense }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    /// Smallest number of frames accepted: one kernel footprint.
    pub fn min_frames(&self) -> usize {
        self.config.kernel
    }

    /// Refreshes the spectral-norm estimates of every convolution.
    pub fn power_iteration(&mut self) {
        for c in &mut self.convs {
            c.power_iteration();
        }
    }

    fn stack(&self, deg: &ArrayView2<'_, R>, reference: &ArrayView2<'_, R>) -> Result<Array2<R>, ModelError> {
        if deg.dim() != reference.dim() {
            return Err(ModelError::PairShape {
                deg: deg.dim(),
                reference: reference.dim(),
            });
        }
        if deg.nrows() < self.min_frames() {
            return Err(ModelError::TooFewFrames {
                frames: deg.nrows(),
                required: self.min_frames(),
            });
        }
        let (frames, bins) = deg.dim();
        let mut x = Array2::zeros((frames * bins, 2));
        for ((p, d), r) in (0..).zip(deg.iter()).zip(reference.iter()) {
            x[[p, 0]] = *d;
            x[[p, 1]] = *r;
        }
        Ok(x)
    }

    /// Predicted score for `(deg, reference)`; both `T x F` with `T >= kernel`.
    pub fn forward(&self, deg: ArrayView2<'_, R>, reference: ArrayView2<'_, R>) -> Result<R, ModelError> {
        let slope: R = cast(self.config.leaky_slope);
        let (frames, bins) = deg.dim();
        let mut x = self.stack(&deg, &reference)?;
        for conv in &self.convs {
            x = leaky_relu(&conv.forward(x.view(), frames, bins), slope);
        }
        let mut h = x.mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0));
        let last = self.dense.len() - 1;
        for (i, layer) in self.dense.iter().enumerate() {
            let pre = layer.forward(h.view());
            h = if i < last { leaky_relu(&pre, slope) } else { pre };
        }
        Ok(h[[0, 0]])
    }

    pub fn forward_train(
        &self,
        deg: ArrayView2<'_, R>,
        reference: ArrayView2<'_, R>,
    ) -> Result<(R, DiscrimCache<R>), ModelError> {
        let slope: R = cast(self.config.leaky_slope);
        let (frames, bins) = deg.dim();
        let mut x = self.stack(&deg, &reference)?;
        let mut conv_inputs = Vec::with_capacity(self.convs.len());
        let mut conv_pres = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let pre = conv.forward(x.view(), frames, bins);
            let act = leaky_relu(&pre, slope);
            conv_inputs.push(std::mem::replace(&mut x, act));
            conv_pres.push(pre);
        }
        let mut h = x.mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0));
        let mut dense_inputs = Vec::with_capacity(self.dense.len());
        let mut dense_pres = Vec::with_capacity(self.dense.len());
        let last = self.dense.len() - 1;
        for (i, layer) in self.dense.iter().enumerate() {
            let pre = layer.forward(h.view());
            let act = if i < last { leaky_relu(&pre, slope) } else { pre.clone() };
            dense_inputs.push(std::mem::replace(&mut h, act));
            dense_pres.push(pre);
        }
        Ok((
            h[[0, 0]],
            DiscrimCache {
                frames,
                bins,
                conv_inputs,
                conv_pres,
                dense_inputs,
                dense_pres,
            },
        ))
    }

    /// Back-propagates `d_out = dL/dscore`. Parameter gradients accumulate
    /// into `grads` when given; the gradient with respect to the degraded
    /// input (`T x F`) is returned when `want_input_grad` is set.
    pub fn backward(
        &self,
        cache: &DiscrimCache<R>,
        d_out: R,
        mut grads: Option<&mut Self>,
        want_input_grad: bool,
    ) -> Option<Array2<R>> {
        let slope: R = cast(self.config.leaky_slope);
        let last = self.dense.len() - 1;
        let mut d_h = Array2::from_elem((1, 1), d_out);
        for i in (0..self.dense.len()).rev() {
            if i < last {
                leaky_relu_backward(&mut d_h, &cache.dense_pres[i], slope);
            }
            let g = grads.as_deref_mut().map(|g| &mut g.dense[i]);
            d_h = self.dense[i].backward(cache.dense_inputs[i].view(), &d_h, g);
        }
        let pixels = cache.frames * cache.bins;
        let scale = R::one() / cast::<R>(pixels as f64);
        let d_pool: Array1<R> = d_h.row(0).mapv(|v| v * scale);
        let mut d_act = Array2::from_shape_fn((pixels, d_pool.len()), |(_, c)| d_pool[c]);
        for i in (0..self.convs.len()).rev() {
            leaky_relu_backward(&mut d_act, &cache.conv_pres[i], slope);
            let need_input = i > 0 || want_input_grad;
            let g = grads.as_deref_mut().map(|g| &mut g.convs[i]);
            d_act = self.convs[i].backward(cache.conv_inputs[i].view(), cache.frames, cache.bins, &d_act, g, need_input)?;
        }
        let d_deg = d_act.column(0).to_owned();
        Some(d_deg.into_shape_with_order((cache.frames, cache.bins)).expect("pixel count"))
    }

    pub fn cast<S: Real>(&self) -> Discriminator<S> {
        let mut out = Discriminator::<S>::init(self.config.clone(), 0);
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

impl<R: Real> Parameterized<R> for Discriminator<R> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, R>)) {
        for (i, c) in self.convs.iter().enumerate() {
            c.visit(&format!("conv{i}"), f);
        }
        for (i, d) in self.dense.iter().enumerate() {
            d.visit(&format!("dense{i}"), f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, R>)) {
        for (i, c) in self.convs.iter_mut().enumerate() {
            c.visit_mut(&format!("conv{i}"), f);
        }
        for (i, d) in self.dense.iter_mut().enumerate() {
            d.visit_mut(&format!("dense{i}"), f);
        }
    }
}

impl<R: Real> Stateful<R> for Discriminator<R> {
    fn visit_state(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, R>)) {
        self.visit_params(f);
        for (i, c) in self.convs.iter().enumerate() {
            if let Some(s) = &c.spectral_norm {
                f(&format!("conv{i}.sn_u"), s.u.view().into_dyn());
                f(&format!("conv{i}.sn_v"), s.v.view().into_dyn());
            }
        }
    }

    fn visit_state_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, R>)) {
        self.visit_params_mut(f);
        for (i, c) in self.convs.iter_mut().enumerate() {
            if let Some(s) = &mut c.spectral_norm {
                f(&format!("conv{i}.sn_u"), s.u.view_mut().into_dyn());
                f(&format!("conv{i}.sn_v"), s.v.view_mut().into_dyn());
            }
        }
    }
}
