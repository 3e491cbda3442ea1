//! Short-time objective intelligibility.
//!
//! Steps: resample to 10 kHz, drop frames where the reference is more than
//! 40 dB below its loudest frame, 256-sample Hann frames with 50% overlap
//! zero-padded to a 512-point DFT, 15 one-third-octave band envelopes from
//! 150 Hz, then for each band and each run of 30 consecutive frames (sliding
//! by one frame) the degraded envelope is scaled to the reference energy,
//! clipped to a lower signal-to-distortion bound of -15 dB and correlated
//! with the reference. The score is the mean correlation.

use ndarray::{s, Array2};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::AudioSignal;

const EPS: f64 = f64::EPSILON;

#[derive(Error, Debug, PartialEq)]
pub enum StoiError {
    #[error("signals differ in length ({deg} vs {reference} samples)")]
    LengthMismatch { deg: usize, reference: usize },
    #[error("signals differ in sample rate ({deg} vs {reference} Hz)")]
    RateMismatch { deg: u32, reference: u32 },
    #[error("reference is digitally silent")]
    AllSilent,
    #[error("only {frames} frames after silence removal, {required} required")]
    TooShort { frames: usize, required: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoiParams {
    pub target_rate: u32,
    pub frame: usize,
    pub hop: usize,
    pub fft: usize,
    pub bands: usize,
    pub lowest_center_hz: f64,
    pub segment: usize,
    /// Lower signal-to-distortion bound in dB.
    pub sdr_clip_db: f64,
    pub silence_range_db: f64,
}

impl Default for StoiParams {
    fn default() -> Self {
        Self {
            target_rate: 10_000,
            frame: 256,
            hop: 128,
            fft: 512,
            bands: 15,
            lowest_center_hz: 150.0,
            segment: 30,
            sdr_clip_db: -15.0,
            silence_range_db: 40.0,
        }
    }
}

impl StoiParams {
    /// Multiplier on the reference envelope above which the normalized
    /// degraded envelope is clipped.
    pub fn clip_factor(&self) -> f64 {
        1.0 + 10f64.powf(-self.sdr_clip_db / 20.0)
    }
}

/// Score with and without the final clamp to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoiScore {
    pub value: f64,
    pub unclamped: f64,
}

/// Symmetric Hann window without the zero end points.
pub(crate) fn hanning(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).cos())
        .collect()
}

fn frame_starts(len: usize, frame: usize, hop: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(frame)).step_by(hop)
}

/// Result of silence removal: trimmed signals and frame bookkeeping.
#[derive(Clone, Debug)]
pub struct SilenceRemoval {
    pub deg: AudioSignal,
    pub reference: AudioSignal,
    pub total_frames: usize,
    pub retained_frames: usize,
}

/// Energy in dB of each analysis frame of `x`.
pub fn frame_energies_db(x: &[f64], frame: usize, hop: usize) -> Vec<f64> {
    let w = hanning(frame);
    frame_starts(x.len(), frame, hop)
        .map(|start| {
            let norm = x[start..start + frame]
                .iter()
                .zip(&w)
                .map(|(s, w)| (s * w) * (s * w))
                .sum::<f64>()
                .sqrt();
            20.0 * (norm + EPS).log10()
        })
        .collect()
}

/// Drops frames whose reference energy is more than `silence_range_db`
/// below the loudest reference frame, from both signals, and rebuilds each by
/// overlap-adding the retained windowed frames at consecutive positions.
pub fn remove_silent_frames(
    deg: &AudioSignal,
    reference: &AudioSignal,
    params: &StoiParams,
) -> Result<SilenceRemoval, StoiError> {
    if deg.len() != reference.len() {
        return Err(StoiError::LengthMismatch {
            deg: deg.len(),
            reference: reference.len(),
        });
    }
    if deg.sample_rate() != reference.sample_rate() {
        return Err(StoiError::RateMismatch {
            deg: deg.sample_rate(),
            reference: reference.sample_rate(),
        });
    }
    if reference.samples().iter().all(|&v| v == 0.0) {
        return Err(StoiError::AllSilent);
    }
    let (frame, hop) = (params.frame, params.hop);
    let energies = frame_energies_db(reference.samples(), frame, hop);
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = frame_starts(reference.len(), frame, hop)
        .zip(&energies)
        .filter(|(_, &e)| max - params.silence_range_db - e < 0.0)
        .map(|(start, _)| start)
        .collect();
    if keep.is_empty() {
        return Err(StoiError::AllSilent);
    }
    let w = hanning(frame);
    let rebuild = |x: &[f64]| {
        let mut out = vec![0.0; (keep.len() - 1) * hop + frame];
        for (j, &start) in keep.iter().enumerate() {
            for i in 0..frame {
                out[j * hop + i] += x[start + i] * w[i];
            }
        }
        out
    };
    let rate = reference.sample_rate();
    Ok(SilenceRemoval {
        deg: AudioSignal::new(rebuild(deg.samples()), rate).expect("finite input"),
        reference: AudioSignal::new(rebuild(reference.samples()), rate).expect("finite input"),
        total_frames: energies.len(),
        retained_frames: keep.len(),
    })
}

/// One-third-octave band matrix (`bands x (fft/2 + 1)`) and center frequencies.
pub fn third_octave_bands(params: &StoiParams) -> (Array2<f64>, Vec<f64>) {
    let bins = params.fft / 2 + 1;
    let freqs: Vec<f64> = (0..bins)
        .map(|k| k as f64 * params.target_rate as f64 / params.fft as f64)
        .collect();
    let nearest = |target: f64| {
        freqs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let mut obm = Array2::zeros((params.bands, bins));
    let mut centers = Vec::with_capacity(params.bands);
    for band in 0..params.bands {
        let k = band as f64;
        centers.push(params.lowest_center_hz * 2f64.powf(k / 3.0));
        let lo = nearest(params.lowest_center_hz * 2f64.powf((2.0 * k - 1.0) / 6.0));
        let hi = nearest(params.lowest_center_hz * 2f64.powf((2.0 * k + 1.0) / 6.0));
        obm.slice_mut(s![band, lo..hi]).fill(1.0);
    }
    (obm, centers)
}

/// Band envelopes, `bands x frames`.
fn band_envelopes(x: &[f64], obm: &Array2<f64>, params: &StoiParams) -> Array2<f64> {
    let fft = FftPlanner::new().plan_fft_forward(params.fft);
    let w = hanning(params.frame);
    let bins = params.fft / 2 + 1;
    let starts: Vec<usize> = frame_starts(x.len(), params.frame, params.hop).collect();
    let mut power = Array2::zeros((bins, starts.len()));
    let mut buf = vec![Complex::new(0.0, 0.0); params.fft];
    for (t, &start) in starts.iter().enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for i in 0..params.frame {
            buf[i].re = x[start + i] * w[i];
        }
        fft.process(&mut buf);
        for k in 0..bins {
            power[[k, t]] = buf[k].norm_sqr();
        }
    }
    obm.dot(&power).mapv(f64::sqrt)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Intelligibility of `deg` against `reference`.
pub fn stoi_with(
    deg: &AudioSignal,
    reference: &AudioSignal,
    params: &StoiParams,
) -> Result<StoiScore, StoiError> {
    if deg.len() != reference.len() {
        return Err(StoiError::LengthMismatch {
            deg: deg.len(),
            reference: reference.len(),
        });
    }
    if deg.sample_rate() != reference.sample_rate() {
        return Err(StoiError::RateMismatch {
            deg: deg.sample_rate(),
            reference: reference.sample_rate(),
        });
    }
    let deg = deg.resampled(params.target_rate);
    let reference = reference.resampled(params.target_rate);
    let trimmed = remove_silent_frames(&deg, &reference, params)?;

    let (obm, _) = third_octave_bands(params);
    let x_env = band_envelopes(trimmed.reference.samples(), &obm, params);
    let y_env = band_envelopes(trimmed.deg.samples(), &obm, params);
    let frames = x_env.ncols();
    let n = params.segment;
    if frames < n {
        return Err(StoiError::TooShort {
            frames,
            required: n,
        });
    }

    let clip = params.clip_factor();
    let mut total = 0.0;
    let mut count = 0usize;
    let mut xs = vec![0.0; n];
    let mut ys = vec![0.0; n];
    for end in n..=frames {
        for band in 0..params.bands {
            for i in 0..n {
                xs[i] = x_env[[band, end - n + i]];
                ys[i] = y_env[[band, end - n + i]];
            }
            let scale = l2(&xs) / (l2(&ys) + EPS);
            for (y, x) in ys.iter_mut().zip(&xs) {
                *y = (*y * scale).min(x * clip);
            }
            let xm = xs.iter().sum::<f64>() / n as f64;
            let ym = ys.iter().sum::<f64>() / n as f64;
            xs.iter_mut().for_each(|v| *v -= xm);
            ys.iter_mut().for_each(|v| *v -= ym);
            let xn = l2(&xs) + EPS;
            let yn = l2(&ys) + EPS;
            total += xs.iter().zip(&ys).map(|(a, b)| (a / xn) * (b / yn)).sum::<f64>();
            count += 1;
        }
    }
    let unclamped = total / count as f64;
    Ok(StoiScore {
        value: unclamped.clamp(0.0, 1.0),
        unclamped,
    })
}

/// STOI with the standard constants.
pub fn stoi(deg: &AudioSignal, reference: &AudioSignal) -> Result<StoiScore, StoiError> {
    stoi_with(deg, reference, &StoiParams::default())
}
