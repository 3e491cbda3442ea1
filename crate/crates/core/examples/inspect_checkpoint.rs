//! Prints the architecture, training configuration and tensor inventory of
//! a checkpoint.
//!
//! `cargo run --example inspect_checkpoint -- model.ckpt`

use metricgan::models::Checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: inspect_checkpoint <checkpoint>");
        std::process::exit(2);
    };
    let ck = Checkpoint::load(&path)?;
    println!("epoch {} config hash {}", ck.epoch, ck.config_hash);
    println!("{}", serde_json::to_string_pretty(&ck.architecture)?);
    println!("{}", serde_json::to_string_pretty(&ck.config)?);
    let total: usize = ck.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    for t in &ck.tensors {
        println!("  {:<40} {:?}", t.name, t.shape);
    }
    println!("{} tensors, {total} values", ck.tensors.len());
    Ok(())
}
