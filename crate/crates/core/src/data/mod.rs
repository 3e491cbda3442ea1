//! Paired clean/noisy corpora: manifests for the supported directory layouts,
//! loading with resampling to the pipeline rate, SNR mixing, and segment
//! sampling for training epochs.

pub mod synth;

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{wav, AudioSignal, SignalError, DEFAULT_SAMPLE_RATE};
pub use synth::{synthesize_corpus, NoiseKind, SynthConfig};

/// Default noisy channel for the CHiME3 layout.
pub const CHIME3_DEFAULT_CHANNEL: u16 = 5;

#[derive(Error, Debug)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("audio error in `{id}`: {source}")]
    Audio { id: String, source: SignalError },
    #[error("manifest has {} problem(s):\n  {}", .0.len(), .0.join("\n  "))]
    Manifest(Vec<String>),
    #[error("entry `{id}`: clean has {clean} samples, noisy has {noisy}")]
    DurationMismatch { id: String, clean: usize, noisy: usize },
    #[error("clean signal is digitally silent")]
    SilentClean,
    #[error("noise signal is digitally silent")]
    SilentNoise,
    #[error("noise has {noise} samples, clean has {clean}")]
    NoiseTooShort { noise: usize, clean: usize },
    #[error("{requested} segments requested but only {available} available")]
    TooFewSegments { requested: usize, available: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub id: String,
    pub clean: PathBuf,
    pub noisy: PathBuf,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<u16>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairManifest {
    pub entries: Vec<PairEntry>,
}

impl PairManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &PairEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Checks id uniqueness and that every referenced file exists.
    pub fn validate(&self) -> Result<(), DataError> {
        let mut problems = Vec::new();
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                problems.push(format!("duplicate id `{}`", e.id));
            }
            for (role, path) in [("clean", &e.clean), ("noisy", &e.noisy)] {
                if !path.is_file() {
                    problems.push(format!("`{}`: {role} file {} is missing", e.id, path.display()));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(DataError::Manifest(problems))
        }
    }

    /// Writes the generic CSV layout.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["id", "clean", "noisy", "split", "snr_db", "channel"])?;
        for e in &self.entries {
            let split = match e.split {
                Split::Train => "train",
                Split::Test => "test",
            };
            w.write_record([
                e.id.clone(),
                e.clean.display().to_string(),
                e.noisy.display().to_string(),
                split.to_string(),
                e.snr_db.map(|v| v.to_string()).unwrap_or_default(),
                e.channel.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(io_err(path.as_ref()))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestLayout {
    /// CSV with columns `id, clean, noisy[, split, snr_db, channel]`; relative
    /// paths are resolved against the CSV's directory.
    GenericCsv,
    /// Directories `clean_*` / `noisy_*` with identical file names; a
    /// directory name containing `test` marks the test split.
    VoicebankDirs,
    /// Recursively found `<stem>.CH<n>.wav` files; `CH0` is the close-talk
    /// reference. Paths containing `et05` form the test split.
    Chime3 { channel: Option<u16> },
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    clean: PathBuf,
    noisy: PathBuf,
    #[serde(default)]
    split: Option<Split>,
    #[serde(default)]
    snr_db: Option<f64>,
    #[serde(default)]
    channel: Option<u16>,
}

pub fn load_manifest(path: impl AsRef<Path>, layout: ManifestLayout) -> Result<PairManifest, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::Io {
            path: path.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "manifest path does not exist"),
        });
    }
    let manifest = match layout {
        ManifestLayout::GenericCsv => load_csv(path)?,
        ManifestLayout::VoicebankDirs => load_voicebank(path)?,
        ManifestLayout::Chime3 { channel } => load_chime3(path, channel.unwrap_or(CHIME3_DEFAULT_CHANNEL))?,
    };
    manifest.validate()?;
    Ok(manifest)
}

fn load_csv(path: &Path) -> Result<PairManifest, DataError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut entries = Vec::new();
    for row in reader.deserialize() {
        let row: CsvRow = row?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        entries.push(PairEntry {
            id: row.id,
            clean: resolve(row.clean),
            noisy: resolve(row.noisy),
            split: row.split.unwrap_or(Split::Train),
            snr_db: row.snr_db,
            channel: row.channel,
        });
    }
    Ok(PairManifest { entries })
}

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>, DataError> {
    let mut out = fs::read_dir(path)
        .map_err(io_err(path))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(path)))
        .collect::<Result<Vec<_>, _>>()?;
    out.sort();
    Ok(out)
}

fn is_wav(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn load_voicebank(root: &Path) -> Result<PairManifest, DataError> {
    let mut entries = Vec::new();
    let mut problems = Vec::new();
    for dir in sorted_dir(root)? {
        let Some(name) = dir.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(suffix) = name.strip_prefix("clean_") else { continue };
        if !dir.is_dir() {
            continue;
        }
        let noisy_dir = root.join(format!("noisy_{suffix}"));
        if !noisy_dir.is_dir() {
            problems.push(format!("no noisy_{suffix} directory for {name}"));
            continue;
        }
        let split = if suffix.contains("test") { Split::Test } else { Split::Train };
        for clean in sorted_dir(&dir)?.into_iter().filter(|p| is_wav(p)) {
            let file = clean.file_name().expect("listed file").to_owned();
            let noisy = noisy_dir.join(&file);
            let id = Path::new(&file).file_stem().expect("wav stem").to_string_lossy().into_owned();
            if !noisy.is_file() {
                problems.push(format!("`{id}`: noisy counterpart {} is missing", noisy.display()));
                continue;
            }
            entries.push(PairEntry {
                id,
                clean,
                noisy,
                split,
                snr_db: None,
                channel: None,
            });
        }
    }
    if !problems.is_empty() {
        return Err(DataError::Manifest(problems));
    }
    Ok(PairManifest { entries })
}

fn walk_wavs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), DataError> {
    for p in sorted_dir(dir)? {
        if p.is_dir() {
            walk_wavs(&p, out)?;
        } else if is_wav(&p) {
            out.push(p);
        }
    }
    Ok(())
}

/// Splits `F01_050C0101_BUS.CH5.wav` into (`F01_050C0101_BUS`, 5).
fn chime_channel(path: &Path) -> Option<(String, u16)> {
    let stem = path.file_stem()?.to_str()?;
    let (base, ch) = stem.rsplit_once(".CH")?;
    Some((base.to_string(), ch.parse().ok()?))
}

fn load_chime3(root: &Path, channel: u16) -> Result<PairManifest, DataError> {
    let mut files = Vec::new();
    walk_wavs(root, &mut files)?;
    let mut entries = Vec::new();
    let mut problems = Vec::new();
    for noisy in &files {
        let Some((base, ch)) = chime_channel(noisy) else { continue };
        if ch != channel {
            continue;
        }
        let clean = noisy.with_file_name(format!("{base}.CH0.wav"));
        if !clean.is_file() {
            problems.push(format!("`{base}`: close-talk reference {} is missing", clean.display()));
            continue;
        }
        let split = if noisy.to_string_lossy().contains("et05") { Split::Test } else { Split::Train };
        let env = noisy
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        entries.push(PairEntry {
            id: if env.is_empty() { base } else { format!("{env}/{base}") },
            clean,
            noisy: noisy.clone(),
            split,
            snr_db: None,
            channel: Some(channel),
        });
    }
    if !problems.is_empty() {
        return Err(DataError::Manifest(problems));
    }
    Ok(PairManifest { entries })
}

/// Peak scale applied so that no mixture sample exceeds full scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    pub noisy: AudioSignal,
    /// Clean signal with the same peak scale as `noisy`.
    pub clean: AudioSignal,
    /// Gain applied to the noise before adding.
    pub noise_gain: f64,
    /// Factor applied to both signals, if any.
    pub peak_scale: Option<f64>,
}

/// `x = s + g v` with `g` chosen so that the full-utterance SNR equals
/// `snr_db`. The noise is truncated to the clean length.
pub fn mix_at_snr(clean: &AudioSignal, noise: &AudioSignal, snr_db: f64) -> Result<Mixture, DataError> {
    if !snr_db.is_finite() {
        return Err(DataError::InvalidConfig(format!("SNR must be finite, got {snr_db}")));
    }
    if noise.len() < clean.len() {
        return Err(DataError::NoiseTooShort {
            noise: noise.len(),
            clean: clean.len(),
        });
    }
    let noise = noise.truncated(clean.len());
    let p_s = clean.power();
    let p_v = noise.power();
    if p_s == 0.0 {
        return Err(DataError::SilentClean);
    }
    if p_v == 0.0 {
        return Err(DataError::SilentNoise);
    }
    let g = (p_s / (p_v * 10f64.powf(snr_db / 10.0))).sqrt();
    let samples: Vec<f64> = clean
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(s, v)| s + g * v)
        .collect();
    let noisy = AudioSignal::new(samples, clean.sample_rate()).expect("finite inputs mix finitely");
    let peak = noisy.peak();
    let (noisy, clean, peak_scale) = if peak > 1.0 {
        let k = 1.0 / peak;
        (noisy.scaled(k), clean.scaled(k), Some(k))
    } else {
        (noisy, clean.clone(), None)
    };
    Ok(Mixture {
        noisy,
        clean,
        noise_gain: g,
        peak_scale,
    })
}

/// A duration-matched pair at the pipeline sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub clean: AudioSignal,
    pub noisy: AudioSignal,
    pub snr_db: Option<f64>,
}

fn read_audio(id: &str, path: &Path) -> Result<AudioSignal, DataError> {
    let signal = wav::read(path).map_err(|source| DataError::Audio {
        id: id.to_string(),
        source,
    })?;
    Ok(if signal.sample_rate() == DEFAULT_SAMPLE_RATE {
        signal
    } else {
        signal.resampled(DEFAULT_SAMPLE_RATE)
    })
}

pub fn load_entry(entry: &PairEntry) -> Result<Utterance, DataError> {
    let clean = read_audio(&entry.id, &entry.clean)?;
    let noisy = read_audio(&entry.id, &entry.noisy)?;
    if clean.len() != noisy.len() {
        return Err(DataError::DurationMismatch {
            id: entry.id.clone(),
            clean: clean.len(),
            noisy: noisy.len(),
        });
    }
    Ok(Utterance {
        id: entry.id.clone(),
        clean,
        noisy,
        snr_db: entry.snr_db,
    })
}

/// Loads every entry of `split`, collecting all failures before reporting.
pub fn load_split(manifest: &PairManifest, split: Split) -> Result<Vec<Utterance>, DataError> {
    let mut out = Vec::new();
    let mut problems = Vec::new();
    for entry in manifest.split(split) {
        match load_entry(entry) {
            Ok(u) => out.push(u),
            Err(e) => problems.push(e.to_string()),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(DataError::Manifest(problems))
    }
}

/// Indices of `count` distinct items out of `available`, uniformly at random.
pub fn sample_indices(available: usize, count: usize, rng: &mut impl Rng) -> Result<Vec<usize>, DataError> {
    if count > available {
        return Err(DataError::TooFewSegments {
            requested: count,
            available,
        });
    }
    Ok(rand::seq::index::sample(rng, available, count).into_vec())
}

/// Uniform random subset of `count` items, drawn without replacement.
pub fn sample_segments<'a, T>(items: &'a [T], count: usize, rng: &mut impl Rng) -> Result<Vec<&'a T>, DataError> {
    Ok(sample_indices(items.len(), count, rng)?.into_iter().map(|i| &items[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tone(len: usize, amp: f64) -> AudioSignal {
        AudioSignal::new((0..len).map(|i| amp * (i as f64 * 0.07).sin()).collect(), 16000).unwrap()
    }

    #[test]
    fn unit_powers_give_expected_gains() {
        let ones = AudioSignal::new(vec![1.0, -1.0, 1.0, -1.0], 16000).unwrap();
        assert!((mix_at_snr(&ones.scaled(0.5), &ones.scaled(0.5), 0.0).unwrap().noise_gain - 1.0).abs() < 1e-12);
        let m = mix_at_snr(&ones.scaled(0.5), &ones.scaled(0.5), 10.0).unwrap();
        assert!((m.noise_gain - 10f64.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn peak_scale_applies_to_both() {
        let s = tone(1000, 0.9);
        let v = tone(1000, 0.9);
        let m = mix_at_snr(&s, &v, 0.0).unwrap();
        let k = m.peak_scale.unwrap();
        assert!(m.noisy.peak() <= 1.0 + 1e-12);
        assert!((m.clean.samples()[10] - k * s.samples()[10]).abs() < 1e-15);
    }

    #[test]
    fn silent_inputs_are_errors() {
        let zero = AudioSignal::new(vec![0.0; 100], 16000).unwrap();
        assert!(matches!(mix_at_snr(&zero, &tone(100, 0.1), 0.0), Err(DataError::SilentClean)));
        assert!(matches!(mix_at_snr(&tone(100, 0.1), &zero, 0.0), Err(DataError::SilentNoise)));
        assert!(matches!(mix_at_snr(&tone(100, 0.1), &tone(50, 0.1), 0.0), Err(DataError::NoiseTooShort { .. })));
    }

    #[test]
    fn full_sample_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut idx = sample_indices(12, 12, &mut rng).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, (0..12).collect::<Vec<_>>());
        assert!(matches!(sample_indices(3, 4, &mut rng), Err(DataError::TooFewSegments { .. })));
    }

    #[test]
    fn chime_names_parse() {
        assert_eq!(
            chime_channel(Path::new("a/F01_050C0101_BUS.CH5.wav")),
            Some(("F01_050C0101_BUS".into(), 5))
        );
        assert_eq!(chime_channel(Path::new("a/plain.wav")), None);
    }
}
