//! Export of the feature, mask and output spectrograms of one utterance as
//! `.npy` matrices, PNG rasters and SVG figures with labelled axes.

use std::fs;
use std::path::{Path, PathBuf};

use base64::Engine;
use ndarray::Array2;

use super::{io_err, EvalError};
use crate::data::DataError;
use crate::models::{mask_forward, Checkpoint, MaskNet};
use crate::signal::{compute_features, AudioSignal, FeatureMatrix, FrameParams};

/// One exported matrix (`T x F`) and the files written for it.
#[derive(Clone, Debug)]
pub struct ExportedMatrix {
    pub name: String,
    pub values: Array2<f64>,
    pub npy: PathBuf,
    pub png: PathBuf,
    pub svg: PathBuf,
}

/// Writes clean features, noisy features, generator mask and enhanced
/// features, plus de-generator mask and de-enhanced features when the
/// checkpoint has a de-generator.
pub fn export_spectrograms(
    checkpoint: &Checkpoint,
    clean: &AudioSignal,
    noisy: &AudioSignal,
    out_dir: &Path,
) -> Result<Vec<ExportedMatrix>, EvalError> {
    if clean.len() != noisy.len() || clean.sample_rate() != noisy.sample_rate() {
        return Err(DataError::DurationMismatch {
            id: "spectrogram pair".into(),
            clean: clean.len(),
            noisy: noisy.len(),
        }
        .into());
    }
    let params = FrameParams::default();
    let (clean_features, _) = compute_features(clean, &params)?;
    let (noisy_features, frames) = compute_features(noisy, &params)?;
    let masked = |net: &MaskNet<f32>| -> Result<(Array2<f64>, Array2<f64>), EvalError> {
        let mask = mask_forward(net, &noisy_features)?.into_values();
        let out = FeatureMatrix::from_magnitude(&(&mask * &frames.magnitude)).into_values();
        Ok((mask, out))
    };
    let mut matrices = vec![
        ("clean_features", clean_features.into_values()),
        ("noisy_features", noisy_features.values().clone()),
    ];
    let (mask, enhanced) = masked(&checkpoint.generator::<f32>()?)?;
    matrices.push(("generator_mask", mask));
    matrices.push(("enhanced_features", enhanced));
    if checkpoint.has_degenerator() {
        let (mask, deenhanced) = masked(&checkpoint.degenerator::<f32>()?)?;
        matrices.push(("degenerator_mask", mask));
        matrices.push(("deenhanced_features", deenhanced));
    }

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let axes = Axes {
        seconds_per_frame: params.hop_length as f64 / noisy.sample_rate() as f64,
        hz_per_bin: noisy.sample_rate() as f64 / params.dft_length as f64,
    };
    matrices
        .into_iter()
        .map(|(name, values)| {
            let npy = out_dir.join(format!("{name}.npy"));
            ndarray_npy::write_npy(&npy, &values).map_err(|e| EvalError::Io {
                path: npy.clone(),
                source: std::io::Error::other(e),
            })?;
            let png_bytes = render_png(&values)?;
            let png = out_dir.join(format!("{name}.png"));
            fs::write(&png, &png_bytes).map_err(io_err(&png))?;
            let svg = out_dir.join(format!("{name}.svg"));
            fs::write(&svg, render_svg(name, &values, &png_bytes, &axes)).map_err(io_err(&svg))?;
            Ok(ExportedMatrix {
                name: name.to_string(),
                values,
                npy,
                png,
                svg,
            })
        })
        .collect()
}

struct Axes {
    seconds_per_frame: f64,
    hz_per_bin: f64,
}

fn value_range(values: &Array2<f64>) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

/// Dark blue through teal to yellow.
fn colormap(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [0.07, 0.03, 0.28],
        [0.23, 0.32, 0.55],
        [0.13, 0.57, 0.55],
        [0.37, 0.79, 0.38],
        [0.99, 0.91, 0.15],
    ];
    let x = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - k as f64;
    let mut rgb = [0u8; 3];
    for c in 0..3 {
        rgb[c] = ((STOPS[k][c] * (1.0 - f) + STOPS[k + 1][c] * f) * 255.0).round() as u8;
    }
    rgb
}

/// One pixel per time-frequency cell, low frequencies at the bottom.
fn render_png(values: &Array2<f64>) -> Result<Vec<u8>, EvalError> {
    let (t, f) = values.dim();
    let (lo, hi) = value_range(values);
    let img = image::RgbImage::from_fn(t as u32, f as u32, |x, y| {
        let v = values[[x as usize, f - 1 - y as usize]];
        image::Rgb(colormap((v - lo) / (hi - lo)))
    });
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| EvalError::Image(e.to_string()))?;
    Ok(bytes)
}

fn render_svg(title: &str, values: &Array2<f64>, png: &[u8], axes: &Axes) -> String {
    let (t, f) = values.dim();
    let (lo, hi) = value_range(values);
    let (left, top, width, height) = (70.0, 30.0, 640.0, 320.0);
    let duration = t as f64 * axes.seconds_per_frame;
    let nyquist = (f - 1) as f64 * axes.hz_per_bin;
    let data = base64::engine::general_purpose::STANDARD.encode(png);
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">
<text x="{left}" y="18">{title} (range {lo:.3} to {hi:.3})</text>
<image x="{left}" y="{top}" width="{width}" height="{height}" preserveAspectRatio="none" style="image-rendering:pixelated" href="data:image/png;base64,{data}"/>
<rect x="{left}" y="{top}" width="{width}" height="{height}" fill="none" stroke="black"/>
"#,
        w = left + width + 20.0,
        h = top + height + 50.0,
    );
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let x = left + frac * width;
        let y = top + height - frac * height;
        s.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"black\"/><text x=\"{x}\" y=\"{ty}\" text-anchor=\"middle\">{:.2}</text>\n",
            frac * duration,
            b = top + height,
            b2 = top + height + 5.0,
            ty = top + height + 18.0,
        ));
        s.push_str(&format!(
            "<line x1=\"{l2}\" y1=\"{y}\" x2=\"{left}\" y2=\"{y}\" stroke=\"black\"/><text x=\"{tx}\" y=\"{y}\" text-anchor=\"end\" dominant-baseline=\"middle\">{:.0}</text>\n",
            frac * nyquist,
            l2 = left - 5.0,
            tx = left - 8.0,
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">time (s)</text>\n<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">frequency (Hz)</text>\n</svg>\n",
        left + width / 2.0,
        top + height + 40.0,
        top + height / 2.0,
        top + height / 2.0,
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), [18, 8, 71]);
        assert_eq!(colormap(1.0), [252, 232, 38]);
        assert_eq!(colormap(2.0), colormap(1.0));
    }

    #[test]
    fn png_has_one_pixel_per_cell() {
        let v = Array2::from_shape_fn((7, 5), |(t, f)| (t * f) as f64);
        let bytes = render_png(&v).unwrap();
        let img = image::load_from_memory(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (7, 5));
    }
}
