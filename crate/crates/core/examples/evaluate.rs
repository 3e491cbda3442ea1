//! Scores the test split of a manifest, either unprocessed or through the
//! generator of a checkpoint.
//!
//! `cargo run --release --example evaluate -- manifest.csv [model.ckpt]`

use metricgan::data::{load_manifest, load_split, ManifestLayout, Split};
use metricgan::evalcli::{evaluate_testset, Enhancer, ReportSnapshot, Role};
use metricgan::metrics::{MetricEvaluator, MetricId};
use metricgan::models::Checkpoint;
use metricgan::training::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(manifest) = args.first() else {
        eprintln!("usage: evaluate <manifest.csv> [checkpoint]");
        std::process::exit(2);
    };
    let test_set = load_split(&load_manifest(manifest, ManifestLayout::GenericCsv)?, Split::Test)?;
    let (enhancer, snapshot) = match args.get(1) {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let config: TrainConfig = serde_json::from_value(ck.config.clone())?;
            (Enhancer::from_checkpoint(&ck, Role::Generator)?, ReportSnapshot::from_config(&config, path.as_str(), Role::Generator))
        }
        None => (Enhancer::Passthrough, ReportSnapshot::passthrough()),
    };
    let report = evaluate_testset(&enhancer, &test_set, &[MetricId::Stoi], &MetricEvaluator::native_only(), snapshot)?;
    print!("{}", report.to_table());
    Ok(())
}
