//! Central finite-difference checks of the hand-written backward passes.

use metricgan::models::{DiscrimConfig, Discriminator, MaskNet, MaskNetConfig, Parameterized};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const SAMPLES_PER_TENSOR: usize = 6;

/// Worst relative error per parameter group.
#[derive(Debug)]
pub struct GroupError {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
}

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-9 {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

fn get<N: Parameterized<f64>>(net: &N, tensor: usize, index: usize) -> f64 {
    let mut k = 0;
    let mut out = f64::NAN;
    net.visit_params(&mut |_, a| {
        if k == tensor {
            out = *a.iter().nth(index).unwrap();
        }
        k += 1;
    });
    out
}

fn set<N: Parameterized<f64>>(net: &mut N, tensor: usize, index: usize, value: f64) {
    let mut k = 0;
    net.visit_params_mut(&mut |_, mut a| {
        if k == tensor {
            *a.iter_mut().nth(index).unwrap() = value;
        }
        k += 1;
    });
}

/// Compares `grads` (the analytic gradient of `loss` at `net`) against
/// central differences on a sample of entries of every tensor.
fn compare<N: Parameterized<f64> + Clone>(
    net: &N,
    grads: &N,
    loss: impl Fn(&N) -> f64,
    rng: &mut ChaCha8Rng,
) -> Vec<GroupError> {
    let mut sizes = Vec::new();
    let mut names = Vec::new();
    net.visit_params(&mut |name, a| {
        names.push(name.to_string());
        sizes.push(a.len());
    });
    let mut out = Vec::new();
    for (t, (&size, name)) in sizes.iter().zip(&names).enumerate() {
        let mut indices: Vec<usize> = (0..SAMPLES_PER_TENSOR.min(size)).map(|_| rng.gen_range(0..size)).collect();
        indices.sort_unstable();
        indices.dedup();
        let mut worst = 0.0f64;
        let mut probe = net.clone();
        for &i in &indices {
            let base = get(net, t, i);
            set(&mut probe, t, i, base + STEP);
            let up = loss(&probe);
            set(&mut probe, t, i, base - STEP);
            let down = loss(&probe);
            set(&mut probe, t, i, base);
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(rel_err(get(grads, t, i), numeric));
        }
        out.push(GroupError {
            name: name.clone(),
            max_rel_err: worst,
            checked: indices.len(),
        });
    }
    out
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(0.0..scale))
}

/// Mask network at full size with a learnable sigmoid scale; loss is a random
/// projection of the mask.
pub fn masknet_groups(frames: usize, seed: u64) -> Vec<GroupError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = MaskNetConfig {
        learn_beta: true,
        ..Default::default()
    };
    let net = MaskNet::<f64>::init(config, seed);
    let x = random_matrix(frames, 257, 3.0, &mut rng);
    let proj = Array2::from_shape_fn((frames, 257), |_| rng.gen_range(-1.0..1.0));
    let loss = |n: &MaskNet<f64>| (n.forward(x.view()).unwrap() * &proj).sum();
    let (_, cache) = net.forward_train(x.view()).unwrap();
    let mut grads = net.zeros_like();
    net.backward(&cache, &proj, &mut grads);
    compare(&net, &grads, loss, &mut rng)
}

/// Full-size discriminator; loss is the predicted score itself. The extra
/// `input` group covers the gradient with respect to the degraded features.
pub fn discriminator_groups(frames: usize, seed: u64) -> Vec<GroupError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Discriminator::<f64>::init(DiscrimConfig::default(), seed);
    let deg = random_matrix(frames, 257, 3.0, &mut rng);
    let reference = random_matrix(frames, 257, 3.0, &mut rng);
    let loss = |n: &Discriminator<f64>| n.forward(deg.view(), reference.view()).unwrap();
    let (_, cache) = net.forward_train(deg.view(), reference.view()).unwrap();
    let mut grads = net.zeros_like();
    let d_deg = net.backward(&cache, 1.0, Some(&mut grads), true).unwrap();
    let mut groups = compare(&net, &grads, loss, &mut rng);

    let mut worst = 0.0f64;
    for _ in 0..SAMPLES_PER_TENSOR {
        let (i, j) = (rng.gen_range(0..frames), rng.gen_range(0..257));
        let mut probe = deg.clone();
        probe[[i, j]] += STEP;
        let up = net.forward(probe.view(), reference.view()).unwrap();
        probe[[i, j]] -= 2.0 * STEP;
        let down = net.forward(probe.view(), reference.view()).unwrap();
        worst = worst.max(rel_err(d_deg[[i, j]], (up - down) / (2.0 * STEP)));
    }
    groups.push(GroupError {
        name: "input".into(),
        max_rel_err: worst,
        checked: SAMPLES_PER_TENSOR,
    });
    groups
}
