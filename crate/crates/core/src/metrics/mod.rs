//! Intrusive speech metrics and their normalization to `[0, 1]`.
//!
//! STOI is computed natively. PESQ and the composite measures (Csig, Cbak,
//! Covl) are only reachable through an [`ExternalCommand`]; asking for them
//! without one configured is an [`MetricError::Unavailable`] error rather than
//! a silent fallback.
//!
//! Normalization is affine over each metric's declared raw range, so the
//! range maximum maps to exactly 1. For PESQ this is `(raw + 0.5) / 5`, which
//! puts a normalized target of 0.5 at raw PESQ 2.0.

pub mod external;
pub mod stoi;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::AudioSignal;
pub use external::{ExternalCommand, ExternalError};
pub use stoi::{remove_silent_frames, stoi, stoi_with, StoiError, StoiParams, StoiScore};

#[derive(Error, Debug)]
pub enum MetricError {
    #[error("{metric} is unavailable: {reason}")]
    Unavailable { metric: MetricId, reason: String },
    #[error(transparent)]
    Stoi(#[from] StoiError),
    #[error("pair is not aligned: {deg} vs {reference} samples")]
    Misaligned { deg: usize, reference: usize },
    #[error("unknown metric `{0}`")]
    Unknown(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricId {
    Pesq,
    Stoi,
    Csig,
    Cbak,
    Covl,
}

impl MetricId {
    pub const ALL: [MetricId; 5] = [
        MetricId::Pesq,
        MetricId::Stoi,
        MetricId::Csig,
        MetricId::Cbak,
        MetricId::Covl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Pesq => "pesq",
            MetricId::Stoi => "stoi",
            MetricId::Csig => "csig",
            MetricId::Cbak => "cbak",
            MetricId::Covl => "covl",
        }
    }

    /// Declared `(min, max)` of the raw score.
    pub fn raw_range(self) -> (f64, f64) {
        match self {
            MetricId::Pesq => (-0.5, 4.5),
            MetricId::Stoi => (0.0, 1.0),
            MetricId::Csig | MetricId::Cbak | MetricId::Covl => (1.0, 5.0),
        }
    }

    pub fn is_native(self) -> bool {
        matches!(self, MetricId::Stoi)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name().to_uppercase())
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| MetricError::Unknown(s.to_string()))
    }
}

/// A metric score mapped into `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedScore(f64);

impl NormalizedScore {
    pub const PERFECT: NormalizedScore = NormalizedScore(1.0);

    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Record of a raw score that fell outside the declared range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClampWarning {
    pub metric: MetricId,
    pub raw: f64,
    pub clamped_to: f64,
}

/// Normalizes and reports whether the raw value had to be clamped.
pub fn normalize_checked(metric: MetricId, raw: f64) -> (NormalizedScore, Option<ClampWarning>) {
    let (lo, hi) = metric.raw_range();
    let clamped = raw.clamp(lo, hi);
    let warning = (clamped != raw).then_some(ClampWarning {
        metric,
        raw,
        clamped_to: clamped,
    });
    let value = if clamped == hi {
        1.0
    } else {
        (clamped - lo) / (hi - lo)
    };
    (NormalizedScore(value), warning)
}

pub fn normalize(metric: MetricId, raw: f64) -> NormalizedScore {
    let (score, warning) = normalize_checked(metric, raw);
    if let Some(w) = warning {
        log::warn!(
            "{} raw score {} outside declared range, clamped to {}",
            w.metric,
            w.raw,
            w.clamped_to
        );
    }
    score
}

/// Dispatches metric evaluation to the native implementation or to the
/// configured external command for that metric.
#[derive(Clone, Debug, Default)]
pub struct MetricEvaluator {
    external: BTreeMap<MetricId, ExternalCommand>,
    stoi: StoiParams,
}

impl MetricEvaluator {
    pub fn native_only() -> Self {
        Self::default()
    }

    pub fn with_external(mut self, metric: MetricId, command: ExternalCommand) -> Self {
        self.external.insert(metric, command);
        self
    }

    pub fn is_available(&self, metric: MetricId) -> bool {
        metric.is_native() || self.external.contains_key(&metric)
    }

    /// Fails with `Unavailable` unless every metric in `metrics` can be computed.
    pub fn require(&self, metrics: &[MetricId]) -> Result<(), MetricError> {
        match metrics.iter().find(|m| !self.is_available(**m)) {
            Some(&metric) => Err(MetricError::Unavailable {
                metric,
                reason: "no external evaluator configured".into(),
            }),
            None => Ok(()),
        }
    }

    /// Raw score of `deg` against `reference`.
    pub fn raw(&self, deg: &AudioSignal, reference: &AudioSignal, metric: MetricId) -> Result<f64, MetricError> {
        if deg.len() != reference.len() {
            return Err(MetricError::Misaligned {
                deg: deg.len(),
                reference: reference.len(),
            });
        }
        if metric == MetricId::Stoi {
            return Ok(stoi_with(deg, reference, &self.stoi)?.value);
        }
        let command = self.external.get(&metric).ok_or_else(|| MetricError::Unavailable {
            metric,
            reason: "no external evaluator configured".into(),
        })?;
        command.run(deg, reference).map_err(|e| MetricError::Unavailable {
            metric,
            reason: e.to_string(),
        })
    }

    /// Raw and normalized score of an aligned pair.
    pub fn evaluate_pair(
        &self,
        deg: &AudioSignal,
        reference: &AudioSignal,
        metric: MetricId,
    ) -> Result<(f64, NormalizedScore), MetricError> {
        let raw = self.raw(deg, reference, metric)?;
        Ok((raw, normalize(metric, raw)))
    }
}

/// [`MetricEvaluator::evaluate_pair`] with native metrics only.
pub fn evaluate_pair(
    deg: &AudioSignal,
    reference: &AudioSignal,
    metric: MetricId,
) -> Result<(f64, NormalizedScore), MetricError> {
    MetricEvaluator::native_only().evaluate_pair(deg, reference, metric)
}
