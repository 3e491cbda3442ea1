use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::{uniform_fan_in, Real};

/// Fully connected layer, `y = x W + b` with `W` stored `in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<R: Real> {
    pub weight: Array2<R>,
    pub bias: Array1<R>,
}

impl<R: Real> Dense<R> {
    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: uniform_fan_in((inputs, outputs), inputs, rng),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: ArrayView2<'_, R>) -> Array2<R> {
        x.dot(&self.weight) + &self.bias
    }

    /// Returns `dL/dx`; parameter gradients are accumulated into `grads`
    /// when given.
    pub fn backward(&self, x: ArrayView2<'_, R>, dy: &Array2<R>, grads: Option<&mut Self>) -> Array2<R> {
        if let Some(g) = grads {
            g.weight += &x.t().dot(dy);
            g.bias += &dy.sum_axis(Axis(0));
        }
        dy.dot(&self.weight.t())
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, R>)) {
        f(&format!("{prefix}.weight"), self.weight.view().into_dyn());
        f(&format!("{prefix}.bias"), self.bias.view().into_dyn());
    }

    pub(crate) fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, R>)) {
        f(&format!("{prefix}.weight"), self.weight.view_mut().into_dyn());
        f(&format!("{prefix}.bias"), self.bias.view_mut().into_dyn());
    }
}
