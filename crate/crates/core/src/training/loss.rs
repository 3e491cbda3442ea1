//! Squared-error objectives of the three networks, for one utterance.

use super::TrainError;

/// Predictions and targets entering the discriminator objective for one
/// utterance. The de-enhanced pair is present only with a de-generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscriminatorTerms {
    pub pred_clean: f64,
    pub pred_enh: f64,
    pub pred_noisy: f64,
    pub q_enh: f64,
    pub q_noisy: f64,
    /// `(pred_deenh, q_deenh)`
    pub deenh: Option<(f64, f64)>,
}

impl DiscriminatorTerms {
    /// `(prediction, target)` pairs in a fixed order: clean, enhanced,
    /// noisy, de-enhanced.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        let mut out = vec![
            (self.pred_clean, 1.0),
            (self.pred_enh, self.q_enh),
            (self.pred_noisy, self.q_noisy),
        ];
        out.extend(self.deenh);
        out
    }
}

fn check_target(name: &str, q: f64) -> Result<(), TrainError> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(TrainError::Config(format!("{name} = {q} is outside [0, 1]")))
    }
}

/// Sum of the squared prediction errors of the clean (target 1), enhanced,
/// noisy and, if present, de-enhanced pairs.
pub fn loss_discriminator(terms: &DiscriminatorTerms) -> Result<f64, TrainError> {
    check_target("q_enh", terms.q_enh)?;
    check_target("q_noisy", terms.q_noisy)?;
    if let Some((_, q)) = terms.deenh {
        check_target("q_deenh", q)?;
    }
    Ok(terms.pairs().iter().map(|(p, t)| (p - t).powi(2)).sum())
}

pub fn loss_generator(pred_enh: f64) -> f64 {
    (pred_enh - 1.0).powi(2)
}

pub fn loss_degenerator(pred_deenh: f64, w: f64) -> f64 {
    (pred_deenh - w).powi(2)
}

/// Derivative of `(pred - target)^2` with respect to `pred`.
pub fn squared_error_grad(pred: f64, target: f64) -> f64 {
    2.0 * (pred - target)
}
