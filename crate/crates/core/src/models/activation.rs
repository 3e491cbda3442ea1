//! Element-wise activations and the learnable sigmoid output layer.

use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Zip};

use super::{cast, Real};

/// `beta / (1 + exp(-alpha x))`.
pub fn learnable_sigmoid(x: f64, alpha: f64, beta: f64) -> f64 {
    beta / (1.0 + (-alpha * x).exp())
}

/// Partial derivatives of [`learnable_sigmoid`] with respect to `(x, alpha, beta)`.
pub fn learnable_sigmoid_grad(x: f64, alpha: f64, beta: f64) -> (f64, f64, f64) {
    let s = 1.0 / (1.0 + (-alpha * x).exp());
    let ds = s * (1.0 - s);
    (beta * alpha * ds, beta * x * ds, s)
}

pub(crate) fn sigmoid<R: Real>(x: R) -> R {
    R::one() / (R::one() + (-x).exp())
}

pub(crate) fn leaky_relu<R: Real>(x: &Array2<R>, slope: R) -> Array2<R> {
    x.mapv(|v| if v > R::zero() { v } else { v * slope })
}

/// Multiplies `grad` in place by the leaky-rectifier derivative at `pre`.
pub(crate) fn leaky_relu_backward<R: Real>(grad: &mut Array2<R>, pre: &Array2<R>, slope: R) {
    Zip::from(grad).and(pre).for_each(|g, &p| {
        if p <= R::zero() {
            *g *= slope;
        }
    });
}

/// Per-column learnable sigmoid: column `k` uses slope `alpha[k]`, all
/// columns share `beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnableSigmoid<R: Real> {
    pub alpha: Array1<R>,
    /// Single-element array so it can be visited like any other parameter.
    pub beta: Array1<R>,
    pub learn_beta: bool,
}

impl<R: Real> LearnableSigmoid<R> {
    pub fn new(width: usize, beta: f64, learn_beta: bool) -> Self {
        Self {
            alpha: Array1::ones(width),
            beta: Array1::from_elem(1, cast(beta)),
            learn_beta,
        }
    }

    pub fn beta(&self) -> R {
        self.beta[0]
    }

    pub fn forward(&self, x: ArrayView2<'_, R>) -> Array2<R> {
        let beta = self.beta();
        let mut y = x.to_owned();
        for mut row in y.rows_mut() {
            Zip::from(&mut row)
                .and(&self.alpha)
                .for_each(|v, &a| *v = beta * sigmoid(a * *v));
        }
        y
    }

    /// Back-propagates `dy` given the layer input `x`; accumulates parameter
    /// gradients into `grads` and returns the input gradient.
    pub fn backward(&self, x: ArrayView2<'_, R>, dy: &Array2<R>, grads: &mut Self) -> Array2<R> {
        let beta = self.beta();
        let mut dx = Array2::zeros(x.raw_dim());
        let mut dbeta = R::zero();
        for ((xr, dyr), mut dxr) in x.rows().into_iter().zip(dy.rows()).zip(dx.rows_mut()) {
            for k in 0..xr.len() {
                let a = self.alpha[k];
                let s = sigmoid(a * xr[k]);
                let ds = s * (R::one() - s);
                let g = dyr[k];
                dxr[k] = g * beta * a * ds;
                grads.alpha[k] += g * beta * xr[k] * ds;
                dbeta += g * s;
            }
        }
        if self.learn_beta {
            grads.beta[0] += dbeta;
        }
        dx
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, R>)) {
        f(&format!("{prefix}.alpha"), self.alpha.view().into_dyn());
        if self.learn_beta {
            f(&format!("{prefix}.beta"), self.beta.view().into_dyn());
        }
    }

    pub(crate) fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, R>)) {
        f(&format!("{prefix}.alpha"), self.alpha.view_mut().into_dyn());
        if self.learn_beta {
            f(&format!("{prefix}.beta"), self.beta.view_mut().into_dyn());
        }
    }
}
