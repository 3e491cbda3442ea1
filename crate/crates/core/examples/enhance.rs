//! Applies the generator of a checkpoint to a WAV file.
//!
//! `cargo run --release --example enhance -- model.ckpt noisy.wav enhanced.wav`

use std::path::Path;

use metricgan::evalcli::{enhance_file, Role};
use metricgan::models::Checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [ck, input, output] = args.as_slice() else {
        eprintln!("usage: enhance <checkpoint> <noisy.wav> <enhanced.wav>");
        std::process::exit(2);
    };
    let ck = Checkpoint::load(ck)?;
    enhance_file(&ck, Path::new(input), Path::new(output), Role::Generator)?;
    println!("epoch {} generator -> {output}", ck.epoch);
    Ok(())
}
