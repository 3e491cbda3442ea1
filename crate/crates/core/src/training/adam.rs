//! Adaptive-moment optimizer over any [`Parameterized`] network.

use ndarray::ArrayD;

use crate::models::{cast, Parameterized, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct Adam<R: Real> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<ArrayD<R>>,
    second: Vec<ArrayD<R>>,
}

impl<R: Real> Adam<R> {
    pub fn new<N: Parameterized<R>>(net: &N, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let mut first = Vec::new();
        net.visit_params(&mut |_, a| first.push(ArrayD::zeros(a.raw_dim())));
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            second: first.clone(),
            first,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of `net` with gradient `grads` (same architecture).
    pub fn step<N: Parameterized<R>>(&mut self, net: &mut N, grads: &N) {
        self.step += 1;
        let (b1, b2): (R, R) = (cast(self.beta1), cast(self.beta2));
        let one = R::one();
        let mut k = 0;
        let (first, second) = (&mut self.first, &mut self.second);
        grads.visit_params(&mut |_, g| {
            let (m, v) = (&mut first[k], &mut second[k]);
            ndarray::Zip::from(m).and(v).and(&g).for_each(|m, v, &g| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
            });
            k += 1;
        });
        let t = self.step as i32;
        let c1: R = cast(1.0 - self.beta1.powi(t));
        let c2: R = cast(1.0 - self.beta2.powi(t));
        let lr: R = cast(self.learning_rate);
        let eps: R = cast(self.epsilon);
        let mut k = 0;
        net.visit_params_mut(&mut |_, mut p| {
            ndarray::Zip::from(&mut p)
                .and(&self.first[k])
                .and(&self.second[k])
                .for_each(|p, &m, &v| *p -= lr * (m / c1) / ((v / c2).sqrt() + eps));
            k += 1;
        });
    }
}
