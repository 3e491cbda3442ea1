//! 16-bit PCM mono WAV reading and writing.

use std::path::Path;

use super::{AudioSignal, Result, SignalError};

/// Reads a WAV file as mono. Multi-channel files are rejected; use
/// [`read_channel`] to pick one channel.
pub fn read(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let reader = hound::WavReader::open(path.as_ref())?;
    if reader.spec().channels != 1 {
        return Err(SignalError::UnsupportedFormat(format!(
            "{} has {} channels, expected mono",
            path.as_ref().display(),
            reader.spec().channels
        )));
    }
    read_channel_from(reader, 0)
}

/// Reads one channel (zero-based) of a possibly multi-channel WAV file.
pub fn read_channel(path: impl AsRef<Path>, channel: usize) -> Result<AudioSignal> {
    let reader = hound::WavReader::open(path.as_ref())?;
    read_channel_from(reader, channel)
}

fn read_channel_from<R: std::io::Read>(
    mut reader: hound::WavReader<R>,
    channel: usize,
) -> Result<AudioSignal> {
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channel >= channels {
        return Err(SignalError::UnsupportedFormat(format!(
            "channel {channel} requested from a {channels}-channel file"
        )));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
    };
    let samples = interleaved
        .into_iter()
        .skip(channel)
        .step_by(channels)
        .collect();
    AudioSignal::new(samples, spec.sample_rate)
}

/// Quantizes one sample to 16-bit PCM, clipping at full scale.
pub fn quantize(sample: f64) -> i16 {
    (sample * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes `signal` as 16-bit PCM mono.
pub fn write(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec)?;
    for &s in signal.samples() {
        writer.write_sample(quantize(s))?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let x: Vec<f64> = (0..100).map(|i| (i as f64 / 10.0).sin() * 0.5).collect();
        write(&path, &AudioSignal::new(x.clone(), 16000).unwrap()).unwrap();
        let y = read(&path).unwrap();
        assert_eq!(y.sample_rate(), 16000);
        for (a, b) in x.iter().zip(y.samples()) {
            assert!((a - b).abs() <= 0.5 / 32768.0 + 1e-12);
        }
    }

    #[test]
    fn quantize_clips() {
        assert_eq!(quantize(2.0), 32767);
        assert_eq!(quantize(-2.0), -32768);
        assert_eq!(quantize(0.0), 0);
    }
}
