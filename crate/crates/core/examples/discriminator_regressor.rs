//! Trains the discriminator alone to predict normalized STOI of synthetic
//! noisy/clean pairs and reports held-out error.
//!
//! `cargo run --release --example discriminator_regressor -- [n_pairs] [passes]`

use metricgan::data::synth::{synthesize_pair, SynthConfig};
use metricgan::metrics::{normalize, stoi, MetricId};
use metricgan::models::{DiscrimConfig, Discriminator};
use metricgan::signal::{compute_features, FrameParams};
use metricgan::training::{regression_epoch, regression_mse, Adam, RegressionSample};
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let passes: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let config = SynthConfig {
        n_pairs: n,
        min_duration: 0.5,
        max_duration: 0.5,
        snr_grid: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
        ..SynthConfig::default()
    };
    let params = FrameParams::default();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let (clean, noisy, _) = synthesize_pair(&config, i)?;
        let q = normalize(MetricId::Stoi, stoi(&noisy, &clean)?.value).value();
        let (fx, _) = compute_features(&noisy, &params)?;
        let (fs, _) = compute_features(&clean, &params)?;
        samples.push(RegressionSample::new(fx.values(), fs.values(), q));
    }
    let (train_set, held_out) = samples.split_at(n * 4 / 5);
    let mut d = Discriminator::<f32>::init(DiscrimConfig::default(), 5);
    let mut opt = Adam::new(&d, 5e-4, 0.9, 0.999, 1e-8);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    println!("held-out MSE before training {:.4}", regression_mse(&d, held_out)?);
    for pass in 1..=passes {
        let train_mse = regression_epoch(&mut d, &mut opt, train_set, &mut rng)?;
        println!("pass {pass}: train {train_mse:.4}, held-out {:.4}", regression_mse(&d, held_out)?);
    }
    Ok(())
}
