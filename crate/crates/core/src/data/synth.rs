//! Deterministic synthetic corpus for desk-scale runs.
//!
//! The speech proxy is a sequence of "syllables": harmonic tone complexes
//! with a gliding fundamental, two formant-like resonances shaping the
//! harmonic amplitudes, band-limited to 4 kHz, under a raised-sine amplitude
//! envelope. Noise is white, pink, or a babble proxy made of several
//! overlapping speech proxies. Pair `i` uses SNR `grid[i % grid.len()]` and
//! noise kind `kinds[(i / grid.len()) % kinds.len()]`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{io_err, mix_at_snr, DataError, PairEntry, PairManifest, Split};
use crate::signal::{wav, AudioSignal, DEFAULT_SAMPLE_RATE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Pink,
    Babble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_pairs: usize,
    /// Utterance length range in seconds; each pair draws uniformly.
    pub min_duration: f64,
    pub max_duration: f64,
    pub snr_grid: Vec<f64>,
    pub noise_kinds: Vec<NoiseKind>,
    /// Share of pairs (taken from the end) assigned to the test split.
    pub test_fraction: f64,
    /// RMS level of the clean proxy.
    pub speech_rms: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_pairs: 100,
            min_duration: 1.0,
            max_duration: 3.0,
            snr_grid: vec![0.0, 5.0, 10.0, 15.0],
            noise_kinds: vec![NoiseKind::White, NoiseKind::Pink, NoiseKind::Babble],
            test_fraction: 0.2,
            speech_rms: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidConfig(m.to_string()));
        if self.n_pairs == 0 {
            return bad("n_pairs must be at least 1");
        }
        if self.snr_grid.is_empty() || self.snr_grid.iter().any(|s| !s.is_finite()) {
            return bad("snr_grid must be non-empty and finite");
        }
        if self.noise_kinds.is_empty() {
            return bad("noise_kinds must be non-empty");
        }
        if !(self.min_duration > 0.0 && self.min_duration <= self.max_duration) {
            return bad("durations must satisfy 0 < min_duration <= max_duration");
        }
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return bad("test_fraction must lie in [0, 1]");
        }
        if !(self.speech_rms > 0.0 && self.speech_rms < 0.5) {
            return bad("speech_rms must lie in (0, 0.5)");
        }
        Ok(())
    }

    pub fn test_count(&self) -> usize {
        (self.n_pairs as f64 * self.test_fraction).round() as usize
    }
}

/// Per-pair record written to the provenance file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairProvenance {
    pub id: String,
    pub snr_db: f64,
    pub noise: NoiseKind,
    pub samples: usize,
    pub noise_gain: f64,
    pub peak_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub config: SynthConfig,
    pub sample_rate: u32,
    pub pairs: Vec<PairProvenance>,
}

fn normalize_rms(x: &mut [f64], rms: f64) {
    let p = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if p > 0.0 {
        x.iter_mut().for_each(|v| *v *= rms / p);
    }
}

/// Speech-like harmonic signal of `len` samples with unit-free level.
pub fn speech_proxy(len: usize, sample_rate: u32, rng: &mut impl Rng) -> Vec<f64> {
    let sr = sample_rate as f64;
    let band_limit = 4000f64.min(0.45 * sr);
    let mut out = vec![0.0; len];
    let mut phases = vec![0.0f64; 64];
    let mut start = 0;
    while start < len {
        let dur = ((rng.gen_range(0.12..0.30) * sr) as usize).max(1);
        let end = (start + dur).min(len);
        let f0_a: f64 = rng.gen_range(100.0..220.0);
        let f0_b = f0_a * rng.gen_range(0.85..1.15);
        let formants = [
            (rng.gen_range(300.0..900.0), rng.gen_range(80.0..160.0)),
            (rng.gen_range(900.0..2500.0), rng.gen_range(120.0..250.0)),
        ];
        let n_harm = ((band_limit / f0_a.max(f0_b)) as usize).min(phases.len());
        let amps: Vec<f64> = (1..=n_harm)
            .map(|k| {
                let f = k as f64 * f0_a;
                let res: f64 = formants.iter().map(|(fc, bw)| 1.0 / (1.0 + ((f - fc) / bw).powi(2))).sum();
                (0.05 + res) / (k as f64).sqrt()
            })
            .collect();
        for (n, o) in out[start..end].iter_mut().enumerate() {
            let tau = n as f64 / dur as f64;
            let f0 = f0_a + (f0_b - f0_a) * tau;
            let env = 0.05 + 0.95 * (PI * tau).sin().powi(2);
            let mut acc = 0.0;
            for (k, (a, ph)) in amps.iter().zip(phases.iter_mut()).enumerate() {
                *ph += 2.0 * PI * (k + 1) as f64 * f0 / sr;
                acc += a * ph.sin();
            }
            *o = env * acc;
        }
        phases.iter_mut().for_each(|p| *p %= 2.0 * PI);
        start = end;
    }
    out
}

/// Noise of the given kind, `len` samples, unit RMS.
pub fn noise(kind: NoiseKind, len: usize, sample_rate: u32, rng: &mut impl Rng) -> Vec<f64> {
    let mut x: Vec<f64> = match kind {
        NoiseKind::White => (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        NoiseKind::Pink => {
            // Paul Kellet's refined pinking filter
            let mut b = [0.0f64; 7];
            (0..len)
                .map(|_| {
                    let w: f64 = rng.sample(StandardNormal);
                    b[0] = 0.99886 * b[0] + w * 0.0555179;
                    b[1] = 0.99332 * b[1] + w * 0.0750759;
                    b[2] = 0.96900 * b[2] + w * 0.1538520;
                    b[3] = 0.86650 * b[3] + w * 0.3104856;
                    b[4] = 0.55000 * b[4] + w * 0.5329522;
                    b[5] = -0.7616 * b[5] - w * 0.0168980;
                    let y = b.iter().sum::<f64>() + w * 0.5362;
                    b[6] = w * 0.115926;
                    y
                })
                .collect()
        }
        NoiseKind::Babble => {
            let mut acc = vec![0.0; len];
            for _ in 0..6 {
                let mut talker = speech_proxy(len, sample_rate, rng);
                normalize_rms(&mut talker, rng.gen_range(0.5..1.0));
                acc.iter_mut().zip(&talker).for_each(|(a, t)| *a += t);
            }
            acc
        }
    };
    normalize_rms(&mut x, 1.0);
    x
}

/// Generates pair `index` of the corpus: `(clean, noisy, provenance)`.
pub fn synthesize_pair(config: &SynthConfig, index: usize) -> Result<(AudioSignal, AudioSignal, PairProvenance), DataError> {
    let sr = DEFAULT_SAMPLE_RATE;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let dur = if config.max_duration > config.min_duration {
        rng.gen_range(config.min_duration..config.max_duration)
    } else {
        config.min_duration
    };
    let len = (dur * sr as f64).round() as usize;
    let snr_db = config.snr_grid[index % config.snr_grid.len()];
    let kind = config.noise_kinds[(index / config.snr_grid.len()) % config.noise_kinds.len()];
    let mut speech = speech_proxy(len, sr, &mut rng);
    normalize_rms(&mut speech, config.speech_rms);
    let clean = AudioSignal::new(speech, sr).expect("finite proxy");
    let v = AudioSignal::new(noise(kind, len, sr, &mut rng), sr).expect("finite noise");
    let mix = mix_at_snr(&clean, &v, snr_db)?;
    let record = PairProvenance {
        id: format!("syn{index:05}"),
        snr_db,
        noise: kind,
        samples: len,
        noise_gain: mix.noise_gain,
        peak_scale: mix.peak_scale,
    };
    Ok((mix.clean, mix.noisy, record))
}

/// Writes `clean/<id>.wav`, `noisy/<id>.wav`, `manifest.csv` and
/// `provenance.json` under `out_dir` and returns the manifest.
pub fn synthesize_corpus(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<PairManifest, DataError> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    for sub in ["clean", "noisy"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let first_test = config.n_pairs - config.test_count();
    let mut relative = PairManifest::default();
    let mut records = Vec::with_capacity(config.n_pairs);
    for i in 0..config.n_pairs {
        let (clean, noisy, record) = synthesize_pair(config, i)?;
        let rel_clean = PathBuf::from("clean").join(format!("{}.wav", record.id));
        let rel_noisy = PathBuf::from("noisy").join(format!("{}.wav", record.id));
        let audio_err = |source| DataError::Audio {
            id: record.id.clone(),
            source,
        };
        wav::write(out_dir.join(&rel_clean), &clean).map_err(audio_err)?;
        wav::write(out_dir.join(&rel_noisy), &noisy).map_err(audio_err)?;
        relative.entries.push(PairEntry {
            id: record.id.clone(),
            clean: rel_clean,
            noisy: rel_noisy,
            split: if i >= first_test { Split::Test } else { Split::Train },
            snr_db: Some(record.snr_db),
            channel: None,
        });
        records.push(record);
    }
    relative.write_csv(out_dir.join("manifest.csv"))?;
    let provenance = Provenance {
        generator: format!("metricgan {}", env!("CARGO_PKG_VERSION")),
        config: config.clone(),
        sample_rate: DEFAULT_SAMPLE_RATE,
        pairs: records,
    };
    let path = out_dir.join("provenance.json");
    fs::write(&path, serde_json::to_vec_pretty(&provenance)?).map_err(io_err(&path))?;
    let mut manifest = relative;
    for e in &mut manifest.entries {
        e.clean = out_dir.join(&e.clean);
        e.noisy = out_dir.join(&e.noisy);
    }
    Ok(manifest)
}
