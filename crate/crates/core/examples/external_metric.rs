//! Plugs an external evaluator into the metric registry. The command here is
//! a shell one-liner standing in for a PESQ binary; a real adapter prints
//! the raw score as the last line of its output.
//!
//! `cargo run --example external_metric`

use metricgan::data::synth::{synthesize_pair, SynthConfig};
use metricgan::metrics::{ExternalCommand, MetricEvaluator, MetricId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (clean, noisy, _) = synthesize_pair(&SynthConfig::default(), 1)?;
    let native = MetricEvaluator::native_only();
    match native.raw(&noisy, &clean, MetricId::Pesq) {
        Ok(v) => println!("unexpected PESQ {v}"),
        Err(e) => println!("without an adapter: {e}"),
    }
    let fake = ExternalCommand::new(["sh", "-c", "echo comparing \"$0\" \"$1\" at $2 Hz; echo 2.5", "{ref}", "{deg}", "{sr}"]);
    let evaluator = native.with_external(MetricId::Pesq, fake);
    for id in [MetricId::Pesq, MetricId::Stoi] {
        let (raw, normalized) = evaluator.evaluate_pair(&noisy, &clean, id)?;
        println!("{id}: raw {raw:.3}, normalized {:.3}", normalized.value());
    }
    Ok(())
}
