//! Applies the de-generator of a +/- checkpoint to a WAV file, producing the
//! deliberately degraded signal it was trained to emit.
//!
//! `cargo run --release --example degrade -- model.ckpt noisy.wav degraded.wav`

use std::path::Path;

use metricgan::evalcli::{enhance_file, Role};
use metricgan::metrics::stoi;
use metricgan::models::Checkpoint;
use metricgan::signal::wav;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [ck, input, output, rest @ ..] = args.as_slice() else {
        eprintln!("usage: degrade <checkpoint> <noisy.wav> <degraded.wav> [clean.wav]");
        std::process::exit(2);
    };
    let ck = Checkpoint::load(ck)?;
    if !ck.has_degenerator() {
        eprintln!("checkpoint was trained without a de-generator");
        std::process::exit(1);
    }
    enhance_file(&ck, Path::new(input), Path::new(output), Role::DeGenerator)?;
    if let Some(clean) = rest.first() {
        let clean = wav::read(clean)?;
        let (noisy, degraded) = (wav::read(input)?, wav::read(output)?);
        println!(
            "STOI: input {:.3}, de-generator output {:.3}",
            stoi(&noisy, &clean)?.value,
            stoi(&degraded, &clean)?.value
        );
    }
    Ok(())
}
