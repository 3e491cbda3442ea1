//! The mask-estimating generator (also used, with its own weights, as the
//! de-generator) and the metric-predicting discriminator.
//!
//! All layers carry hand-written backward passes. Networks are generic over
//! [`Real`] so training can run in `f32` while gradient checks run in `f64`.

pub mod activation;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod discriminator;
pub mod lstm;
pub mod masknet;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{Array2, ArrayViewD, ArrayViewMutD, Dimension, IntoDimension, LinalgScalar, ScalarOperand};
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use activation::{learnable_sigmoid, learnable_sigmoid_grad, LearnableSigmoid};
pub use checkpoint::{Checkpoint, CheckpointError};
pub use discriminator::{DiscrimConfig, Discriminator};
pub use masknet::{mask_forward, MaskNet, MaskNetConfig};

pub use crate::signal::Mask;

/// Floating point types the networks can be instantiated with.
pub trait Real:
    Float
    + num_traits::FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn to_f64_lossless(self) -> f64;
}

impl Real for f32 {
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64_lossless(self) -> f64 {
        self
    }
}

pub fn cast<R: Real>(v: f64) -> R {
    <R as num_traits::NumCast>::from(v).expect("finite f64 converts")
}

#[derive(Error, Debug, PartialEq)]
pub enum ModelError {
    #[error("expected feature width {expected}, got {got}")]
    FeatureWidth { expected: usize, got: usize },
    #[error("{frames} frames given, at least {required} required")]
    TooFewFrames { frames: usize, required: usize },
    #[error("input shapes differ: {deg:?} vs {reference:?}")]
    PairShape {
        deg: (usize, usize),
        reference: (usize, usize),
    },
}

/// Visiting interface over a network's trainable arrays, in a fixed order.
/// Gradient containers are values of the same type, so parameters and
/// gradients line up by visit order.
pub trait Parameterized<R: Real> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, R>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, R>));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, a| n += a.len());
        n
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit_params(&mut |name, _| names.push(name.to_string()));
        names
    }

    fn fill_zero(&mut self) {
        self.visit_params_mut(&mut |_, mut a| a.fill(R::zero()));
    }

    /// True when every visited array is finite.
    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit_params(&mut |_, a| ok &= a.iter().all(|v| v.is_finite()));
        ok
    }
}

/// Visits every array needed to restore a network, including non-trainable
/// state such as a fixed sigmoid scale or spectral-norm vectors.
pub trait Stateful<R: Real> {
    fn visit_state(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, R>));
    fn visit_state_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, R>));
}

/// Deterministic RNG for parameter initialization.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform initialization with variance `1 / fan_in`.
pub(crate) fn uniform_fan_in<R: Real, Sh: IntoDimension<Dim = ndarray::Ix2>>(
    shape: Sh,
    fan_in: usize,
    rng: &mut impl Rng,
) -> Array2<R> {
    let bound = (3.0 / fan_in as f64).sqrt();
    let dim = shape.into_dimension();
    let (rows, cols) = (dim[0], dim[1]);
    debug_assert!(dim.size() == rows * cols);
    Array2::from_shape_fn((rows, cols), |_| cast(rng.gen_range(-bound..bound)))
}

/// Random `n x n` orthogonal matrix via modified Gram-Schmidt on a Gaussian
/// matrix.
pub(crate) fn orthogonal<R: Real>(n: usize, rng: &mut impl Rng) -> Array2<R> {
    let mut m = Array2::<f64>::from_shape_fn((n, n), |_| rng.sample(StandardNormal));
    for i in 0..n {
        for j in 0..i {
            let proj = m.row(i).dot(&m.row(j));
            let rj = m.row(j).to_owned();
            m.row_mut(i).scaled_add(-proj, &rj);
        }
        let norm = m.row(i).dot(&m.row(i)).sqrt();
        m.row_mut(i).mapv_inplace(|v| v / norm);
    }
    m.mapv(cast)
}

/// Which network [`init_params`] builds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NetworkKind {
    MaskNet(MaskNetConfig),
    Discriminator(DiscrimConfig),
}

/// Freshly initialized parameters of either network kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Network<R: Real> {
    MaskNet(MaskNet<R>),
    Discriminator(Discriminator<R>),
}

pub fn init_params<R: Real>(kind: &NetworkKind, seed: u64) -> Network<R> {
    match kind {
        NetworkKind::MaskNet(c) => Network::MaskNet(MaskNet::init(c.clone(), seed)),
        NetworkKind::Discriminator(c) => Network::Discriminator(Discriminator::init(c.clone(), seed)),
    }
}

/// Collects every trainable array into flat vectors (for comparisons in
/// tests and tooling).
pub fn flatten_params<R: Real>(net: &impl Parameterized<R>) -> Vec<R> {
    let mut out = Vec::new();
    net.visit_params(&mut |_, a| out.extend(a.iter().copied()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = init_rng(0);
        let q: Array2<f64> = orthogonal(16, &mut rng);
        let eye = q.dot(&q.t());
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((eye[[i, j]] - want).abs() < 1e-10);
            }
        }
    }
}
