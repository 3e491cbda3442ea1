//! Desk-scale training on a synthetic corpus using `configs/toy.toml`, then
//! held-out STOI of the generator against the unprocessed input.
//!
//! `cargo run --release --example train_toy -- [out_dir] [epochs]`

use std::path::Path;

use metricgan::data::synth::synthesize_corpus;
use metricgan::data::{load_manifest, load_split, Split};
use metricgan::evalcli::{evaluate_testset, AppConfig, Enhancer, ReportSnapshot, Role};
use metricgan::metrics::MetricId;
use metricgan::training::train;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "toy_run".into());
    let out = Path::new(&out);
    let config_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.toml");
    let mut overrides = Vec::new();
    if let Some(epochs) = args.next() {
        overrides.push(format!("train.epochs={epochs}"));
    }
    let app = AppConfig::load(Some(&config_path), &overrides)?;

    let manifest = synthesize_corpus(&app.synth, out.join("corpus"))?;
    let train_set = load_split(&manifest, Split::Train)?;
    let test_set = load_split(&load_manifest(out.join("corpus/manifest.csv"), app.data.layout)?, Split::Test)?;
    println!("training on {} pairs for {} epochs", train_set.len(), app.train.epochs);

    let outcome = train(app.train.clone(), &train_set, app.metrics.evaluator(), Some(out))?;
    let score = |e: &Enhancer| -> Result<f64, Box<dyn std::error::Error>> {
        let r = evaluate_testset(e, &test_set, &[MetricId::Stoi], &app.metrics.evaluator(), ReportSnapshot::passthrough())?;
        Ok(r.mean(MetricId::Stoi).unwrap_or(f64::NAN))
    };
    let g = Enhancer::from_checkpoint(&outcome.final_checkpoint, Role::Generator)?;
    println!("held-out STOI: noisy {:.3}, enhanced {:.3}", score(&Enhancer::Passthrough)?, score(&g)?);
    for p in &outcome.checkpoints {
        println!("checkpoint {}", p.display());
    }
    Ok(())
}
