//! Writes feature, mask and output spectrograms of one pair as NPY, PNG and
//! SVG files.
//!
//! `cargo run --release --example export_spectrograms -- model.ckpt clean.wav noisy.wav out_dir`

use std::path::Path;

use metricgan::evalcli::{export_spectrograms, read_pipeline_wav};
use metricgan::models::Checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [ck, clean, noisy, out] = args.as_slice() else {
        eprintln!("usage: export_spectrograms <checkpoint> <clean.wav> <noisy.wav> <out_dir>");
        std::process::exit(2);
    };
    let ck = Checkpoint::load(ck)?;
    let clean = read_pipeline_wav(Path::new(clean))?;
    let noisy = read_pipeline_wav(Path::new(noisy))?;
    for m in export_spectrograms(&ck, &clean, &noisy, Path::new(out))? {
        let (t, f) = m.values.dim();
        let max = m.values.fold(f64::MIN, |a, b| a.max(*b));
        println!("{:<20} {t}x{f} max {max:.3} -> {}", m.name, m.svg.display());
    }
    Ok(())
}
