//! Time/frequency transforms used by every other stage of the pipeline.
//!
//! Analysis uses a periodic Hann window with centered framing: the signal is
//! reflect-padded by `window_length / 2` on both sides, so a signal of `N`
//! samples always yields `1 + N / hop_length` frames (integer division).
//! Resynthesis is weighted overlap-add normalized by the summed squared
//! window, which makes analysis followed by resynthesis an identity up to
//! floating point round-off.

pub mod resample;
pub mod wav;

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use resample::resample;

/// Canonical sample rate of the enhancement pipeline.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Error, Debug)]
pub enum SignalError {
    #[error("signal has {len} samples, at least {required} are needed")]
    TooShort { len: usize, required: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid frame parameters: {0}")]
    InvalidParams(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("unsupported wav format: {0}")]
    UnsupportedFormat(String),
}

pub type Result<T> = std::result::Result<T, SignalError>;

/// Mono waveform with its sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(SignalError::InvalidSampleRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean power over the whole signal.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Returns a copy resampled to `rate` (no-op when already at that rate).
    pub fn resampled(&self, rate: u32) -> Self {
        if rate == self.sample_rate {
            return self.clone();
        }
        Self {
            samples: resample(&self.samples, self.sample_rate, rate),
            sample_rate: rate,
        }
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            samples: self.samples[..len.min(self.samples.len())].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / L)`.
    Hann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameParams {
    pub dft_length: usize,
    pub window_length: usize,
    pub hop_length: usize,
    pub window: WindowKind,
}

impl Default for FrameParams {
    fn default() -> Self {
        Self {
            dft_length: 512,
            window_length: 512,
            hop_length: 256,
            window: WindowKind::Hann,
        }
    }
}

impl FrameParams {
    pub fn validate(&self) -> Result<()> {
        if self.hop_length == 0 || self.hop_length > self.window_length {
            return Err(SignalError::InvalidParams(format!(
                "hop_length {} must be in 1..={}",
                self.hop_length, self.window_length
            )));
        }
        if self.window_length > self.dft_length {
            return Err(SignalError::InvalidParams(format!(
                "window_length {} exceeds dft_length {}",
                self.window_length, self.dft_length
            )));
        }
        if self.window_length < 2 {
            return Err(SignalError::InvalidParams("window_length < 2".into()));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.dft_length / 2 + 1
    }

    /// Number of centered frames for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        1 + len / self.hop_length
    }

    fn pad(&self) -> usize {
        self.window_length / 2
    }

    pub fn window(&self) -> Vec<f64> {
        let n = self.window_length;
        match self.window {
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }

    /// Seconds between consecutive frames.
    pub fn frame_period(&self, sample_rate: u32) -> f64 {
        self.hop_length as f64 / sample_rate as f64
    }
}

/// STFT magnitude and phase, `T x F` each.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFrames {
    pub magnitude: Array2<f64>,
    pub phase: Array2<f64>,
    pub params: FrameParams,
    /// Length of the analysed signal, used to trim resynthesis output.
    pub signal_len: usize,
}

impl SpectralFrames {
    pub fn n_frames(&self) -> usize {
        self.magnitude.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.magnitude.ncols()
    }
}

/// Elementwise `log(1 + magnitude)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn from_magnitude(magnitude: &Array2<f64>) -> Self {
        Self(magnitude.mapv(f64::ln_1p))
    }

    /// Wraps raw feature values; negative entries are rejected since they
    /// cannot come from a magnitude.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(SignalError::InvalidParams(format!(
                "feature value at flat index {i} is negative or non-finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_values(self) -> Array2<f64> {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }
}

/// Multiplicative `T x F` gain matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask(Array2<f64>);

impl Mask {
    pub fn new(values: Array2<f64>) -> Self {
        Self(values)
    }

    pub fn ones(frames: usize, bins: usize) -> Self {
        Self(Array2::ones((frames, bins)))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_values(self) -> Array2<f64> {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plan(n: usize) -> FftPair {
    let mut planner = FftPlanner::new();
    FftPair {
        forward: planner.plan_fft_forward(n),
        inverse: planner.plan_fft_inverse(n),
    }
}

fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    out.extend((0..pad).map(|i| x[n - 2 - i]));
    out
}

/// Complex STFT of `samples`, returned as magnitude and phase matrices.
pub fn stft(samples: &[f64], params: &FrameParams) -> Result<SpectralFrames> {
    params.validate()?;
    let required = params.window_length;
    if samples.len() < required {
        return Err(SignalError::TooShort {
            len: samples.len(),
            required,
        });
    }
    let padded = reflect_pad(samples, params.pad());
    let frames = params.n_frames(samples.len());
    let bins = params.n_bins();
    let window = params.window();
    let fft = plan(params.dft_length);

    let mut magnitude = Array2::zeros((frames, bins));
    let mut phase = Array2::zeros((frames, bins));
    let mut buf = vec![Complex::new(0.0, 0.0); params.dft_length];
    for t in 0..frames {
        let start = t * params.hop_length;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, (b, w)) in buf.iter_mut().zip(&window).enumerate() {
            b.re = padded[start + i] * w;
        }
        fft.forward.process(&mut buf);
        for k in 0..bins {
            magnitude[[t, k]] = buf[k].norm();
            phase[[t, k]] = buf[k].arg();
        }
    }
    Ok(SpectralFrames {
        magnitude,
        phase,
        params: *params,
        signal_len: samples.len(),
    })
}

/// Feature computation: `log(1 + |STFT|)` plus the full spectral frames.
pub fn compute_features(
    signal: &AudioSignal,
    params: &FrameParams,
) -> Result<(FeatureMatrix, SpectralFrames)> {
    let frames = stft(signal.samples(), params)?;
    Ok((FeatureMatrix::from_magnitude(&frames.magnitude), frames))
}

/// Inverse of the feature map: `exp(v) - 1` elementwise.
pub fn features_to_magnitude(features: &FeatureMatrix) -> Array2<f64> {
    features.values().mapv(f64::exp_m1)
}

pub fn apply_mask(mask: &Mask, magnitude: &Array2<f64>) -> Result<Array2<f64>> {
    if mask.shape() != magnitude.dim() {
        return Err(SignalError::ShapeMismatch {
            left: mask.shape(),
            right: magnitude.dim(),
        });
    }
    Ok(mask.values() * magnitude)
}

/// Overlap-add resynthesis; output covers `(T - 1) * hop` samples.
pub fn resynthesize(
    magnitude: &Array2<f64>,
    phase: &Array2<f64>,
    params: &FrameParams,
    sample_rate: u32,
) -> Result<AudioSignal> {
    let len = magnitude.nrows().saturating_sub(1) * params.hop_length;
    resynthesize_to_len(magnitude, phase, params, sample_rate, len)
}

/// Overlap-add resynthesis truncated (or zero-extended) to `len` samples.
pub fn resynthesize_to_len(
    magnitude: &Array2<f64>,
    phase: &Array2<f64>,
    params: &FrameParams,
    sample_rate: u32,
    len: usize,
) -> Result<AudioSignal> {
    params.validate()?;
    if magnitude.dim() != phase.dim() {
        return Err(SignalError::ShapeMismatch {
            left: magnitude.dim(),
            right: phase.dim(),
        });
    }
    if magnitude.ncols() != params.n_bins() {
        return Err(SignalError::ShapeMismatch {
            left: magnitude.dim(),
            right: (magnitude.nrows(), params.n_bins()),
        });
    }
    let frames = magnitude.nrows();
    let n_fft = params.dft_length;
    let bins = params.n_bins();
    let window = params.window();
    let fft = plan(n_fft);
    let total = if frames == 0 {
        0
    } else {
        (frames - 1) * params.hop_length + params.window_length
    };
    let mut acc = vec![0.0; total];
    let mut wsum = vec![0.0; total];
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let scale = 1.0 / n_fft as f64;

    for t in 0..frames {
        for k in 0..bins {
            buf[k] = Complex::from_polar(magnitude[[t, k]], phase[[t, k]]);
        }
        // Hermitian completion; DC and Nyquist bins must be real.
        buf[0].im = 0.0;
        if n_fft.is_multiple_of(2) {
            buf[n_fft / 2].im = 0.0;
        }
        for k in bins..n_fft {
            buf[k] = buf[n_fft - k].conj();
        }
        fft.inverse.process(&mut buf);
        let start = t * params.hop_length;
        for (i, w) in window.iter().enumerate() {
            acc[start + i] += buf[i].re * scale * w;
            wsum[start + i] += w * w;
        }
    }

    let pad = params.pad();
    let mut out = vec![0.0; len];
    for (i, o) in out.iter_mut().enumerate() {
        let j = i + pad;
        if j < total && wsum[j] > 1e-10 {
            *o = acc[j] / wsum[j];
        }
    }
    AudioSignal::new(out, sample_rate)
}

/// Resynthesizes `mask * |X|` with the phase of `frames`, trimmed to the
/// analysed length.
pub fn enhance_frames(frames: &SpectralFrames, mask: &Mask, sample_rate: u32) -> Result<AudioSignal> {
    let magnitude = apply_mask(mask, &frames.magnitude)?;
    resynthesize_to_len(
        &magnitude,
        &frames.phase,
        &frames.params,
        sample_rate,
        frames.signal_len,
    )
}

/// Sum of the analysis window over all frames touching each sample, for a
/// run of `frames` frames. Constant in the interior for a COLA window/hop pair.
pub fn window_overlap_sum(params: &FrameParams, frames: usize) -> Vec<f64> {
    let window = params.window();
    let total = (frames - 1) * params.hop_length + params.window_length;
    let mut sum = vec![0.0; total];
    for t in 0..frames {
        let start = t * params.hop_length;
        for (i, w) in window.iter().enumerate() {
            sum[start + i] += w;
        }
    }
    sum
}

/// Signal-to-error ratio in dB of `estimate` against `reference`.
pub fn snr_db(reference: &[f64], estimate: &[f64]) -> f64 {
    let (sig, err) = reference
        .iter()
        .zip(estimate)
        .fold((0.0, 0.0), |(s, e), (r, x)| (s + r * r, e + (r - x) * (r - x)));
    10.0 * (sig / err.max(f64::MIN_POSITIVE)).log10()
}
