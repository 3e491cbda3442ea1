//! Fitting the discriminator alone as a quality regressor on labeled pairs.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{Adam, TrainError};
use crate::models::{cast, Discriminator};

/// Degraded and reference features with the normalized score of the pair.
#[derive(Clone, Debug)]
pub struct RegressionSample {
    pub deg: Array2<f32>,
    pub reference: Array2<f32>,
    pub target: f64,
}

impl RegressionSample {
    pub fn new(deg: &Array2<f64>, reference: &Array2<f64>, target: f64) -> Self {
        Self {
            deg: deg.mapv(|v| v as f32),
            reference: reference.mapv(|v| v as f32),
            target,
        }
    }
}

/// One shuffled pass with one update per sample; returns the mean squared
/// error seen before each update.
pub fn regression_epoch(
    d: &mut Discriminator<f32>,
    opt: &mut Adam<f32>,
    samples: &[RegressionSample],
    rng: &mut impl Rng,
) -> Result<f64, TrainError> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for i in order {
        let s = &samples[i];
        d.power_iteration();
        let mut grads = d.zeros_like();
        let (pred, cache) = d.forward_train(s.deg.view(), s.reference.view())?;
        let err = pred as f64 - s.target;
        if !err.is_finite() {
            return Err(TrainError::Config(format!("non-finite regression output on sample {i}")));
        }
        d.backward(&cache, cast(2.0 * err), Some(&mut grads), false);
        opt.step(d, &grads);
        total += err * err;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Mean squared prediction error without updating.
pub fn regression_mse(d: &Discriminator<f32>, samples: &[RegressionSample]) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for s in samples {
        let pred = d.forward(s.deg.view(), s.reference.view())? as f64;
        total += (pred - s.target).powi(2);
    }
    Ok(total / samples.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DiscrimConfig;
    use rand::SeedableRng;

    #[test]
    fn fits_a_constant_target() {
        let config = DiscrimConfig {
            channels: 2,
            conv_layers: 1,
            dense_units: vec![4],
            ..DiscrimConfig::default()
        };
        let mut d = Discriminator::<f32>::init(config, 3);
        let mut opt = Adam::new(&d, 1e-2, 0.9, 0.999, 1e-8);
        let f = Array2::from_shape_fn((6, 9), |(t, k)| ((t + k) % 4) as f64 * 0.3);
        let samples = vec![RegressionSample::new(&f, &f, 0.7); 4];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let before = regression_mse(&d, &samples).unwrap();
        for _ in 0..40 {
            regression_epoch(&mut d, &mut opt, &samples, &mut rng).unwrap();
        }
        let after = regression_mse(&d, &samples).unwrap();
        assert!(after < 1e-3 && after < before, "{before} -> {after}");
    }
}
