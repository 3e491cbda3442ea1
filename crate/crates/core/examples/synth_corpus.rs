//! Writes a synthetic paired corpus with a manifest and provenance record.
//!
//! `cargo run --example synth_corpus -- out_dir [n_pairs]`

use metricgan::data::synth::{synthesize_corpus, SynthConfig};
use metricgan::data::Split;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic_corpus".into());
    let n_pairs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(40);
    let config = SynthConfig {
        n_pairs,
        ..SynthConfig::default()
    };
    let manifest = synthesize_corpus(&config, &out)?;
    println!(
        "{} pairs in {out}: {} train, {} test",
        manifest.entries.len(),
        manifest.split(Split::Train).count(),
        manifest.split(Split::Test).count()
    );
    for e in manifest.entries.iter().take(3) {
        println!("  {} {:?} {:?} dB", e.id, e.split, e.snr_db);
    }
    Ok(())
}
