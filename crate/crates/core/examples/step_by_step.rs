//! Drives the phases of training epochs one at a time and prints what each
//! phase reports.
//!
//! `cargo run --release --example step_by_step`

use metricgan::data::synth::{synthesize_pair, NoiseKind, SynthConfig};
use metricgan::data::Utterance;
use metricgan::metrics::{MetricEvaluator, MetricId};
use metricgan::models::{DiscrimConfig, MaskNetConfig};
use metricgan::training::{Mode, Role, Step, TrainConfig, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = SynthConfig {
        n_pairs: 12,
        min_duration: 0.5,
        max_duration: 0.5,
        noise_kinds: vec![NoiseKind::White],
        ..SynthConfig::default()
    };
    let data: Vec<Utterance> = (0..synth.n_pairs)
        .map(|i| {
            let (clean, noisy, p) = synthesize_pair(&synth, i)?;
            Ok(Utterance { id: p.id, clean, noisy, snr_db: Some(p.snr_db) })
        })
        .collect::<Result<_, metricgan::data::DataError>>()?;
    let config = TrainConfig {
        mode: Mode::MgPlusMinus,
        objective: MetricId::Stoi,
        segments_per_epoch: 4,
        history_portion: 0.5,
        generator: MaskNetConfig { lstm_units: 16, hidden_units: 16, lstm_layers: 1, ..MaskNetConfig::default() },
        discriminator: DiscrimConfig { channels: 4, ..DiscrimConfig::default() },
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(config, &data, MetricEvaluator::native_only())?;

    // The first epoch through the public phase methods.
    let batch = trainer.prepare_batch(vec![0, 1, 2, 3])?;
    println!("scored outputs: enhanced {:.3}, de-enhanced {:?}", batch.mean_q_enh(), batch.mean_q_deenh());
    let phases = [
        trainer.train_discriminator_on_batch(&batch, Step::DiscriminatorCurrent)?,
        trainer.train_discriminator_on_replay(&batch)?,
        trainer.train_discriminator_on_batch(&batch, Step::DiscriminatorRepeat)?,
        trainer.train_mask_network(Role::Degenerator, &batch)?,
        trainer.train_mask_network(Role::Generator, &batch)?,
    ];
    for r in &phases {
        println!("{:?}: loss {:.4}, mean prediction {:.3}", r.step, r.loss, r.mean_pred);
    }

    // Later epochs in one call; the buffer grows by 2 * floor(H * I) each time.
    for _ in 0..3 {
        let records = trainer.run_epoch()?;
        let last = records.last().expect("five records per epoch");
        println!("epoch {}: buffer {}, generator loss {:.4}", last.epoch, last.buffer_size, last.loss);
    }
    Ok(())
}
