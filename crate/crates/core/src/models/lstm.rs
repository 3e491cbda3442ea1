//! Bidirectional LSTM with explicit backpropagation through time.
//!
//! Gate blocks are laid out `[input, forget, cell, output]` along the `4H`
//! axis of every weight matrix.

use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::activation::sigmoid;
use super::{orthogonal, uniform_fan_in, Real};

/// One direction of an LSTM layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmDirection<R: Real> {
    /// `in x 4H`
    pub input_weight: Array2<R>,
    /// `H x 4H`
    pub recurrent_weight: Array2<R>,
    pub bias: Array1<R>,
}

#[derive(Clone, Debug)]
pub struct DirectionCache<R: Real> {
    /// Post-activation gates, `T x 4H`.
    gates: Array2<R>,
    cells: Array2<R>,
    hidden: Array2<R>,
}

impl<R: Real> LstmDirection<R> {
    pub fn init(inputs: usize, units: usize, rng: &mut impl Rng) -> Self {
        let mut recurrent = Array2::zeros((units, 4 * units));
        for gate in 0..4 {
            recurrent
                .slice_mut(s![.., gate * units..(gate + 1) * units])
                .assign(&orthogonal(units, rng));
        }
        Self {
            input_weight: uniform_fan_in((inputs, 4 * units), inputs, rng),
            recurrent_weight: recurrent,
            bias: Array1::zeros(4 * units),
        }
    }

    pub fn units(&self) -> usize {
        self.recurrent_weight.nrows()
    }

    /// Runs over `x` in time order and returns the hidden states (`T x H`).
    pub fn forward(&self, x: ArrayView2<'_, R>) -> (Array2<R>, DirectionCache<R>) {
        let h_units = self.units();
        let steps = x.nrows();
        let mut gates = x.dot(&self.input_weight) + &self.bias;
        let mut cells = Array2::zeros((steps, h_units));
        let mut hidden = Array2::zeros((steps, h_units));
        let mut h_prev = Array1::<R>::zeros(h_units);
        let mut c_prev = Array1::<R>::zeros(h_units);
        for t in 0..steps {
            let mut z = gates.row_mut(t);
            for (j, &hj) in h_prev.iter().enumerate() {
                if hj != R::zero() {
                    z.scaled_add(hj, &self.recurrent_weight.row(j));
                }
            }
            for k in 0..h_units {
                let i = sigmoid(z[k]);
                let f = sigmoid(z[h_units + k]);
                let g = z[2 * h_units + k].tanh();
                let o = sigmoid(z[3 * h_units + k]);
                z[k] = i;
                z[h_units + k] = f;
                z[2 * h_units + k] = g;
                z[3 * h_units + k] = o;
                let c = f * c_prev[k] + i * g;
                cells[[t, k]] = c;
                hidden[[t, k]] = o * c.tanh();
            }
            h_prev.assign(&hidden.row(t));
            c_prev.assign(&cells.row(t));
        }
        let out = hidden.clone();
        (
            out,
            DirectionCache {
                gates,
                cells,
                hidden,
            },
        )
    }

    /// Backpropagation through time. Returns `dL/dx`.
    pub fn backward(
        &self,
        x: ArrayView2<'_, R>,
        cache: &DirectionCache<R>,
        d_hidden: ArrayView2<'_, R>,
        grads: &mut Self,
    ) -> Array2<R> {
        let h_units = self.units();
        let steps = x.nrows();
        let mut dz = Array2::<R>::zeros((steps, 4 * h_units));
        let mut dh_next = Array1::<R>::zeros(h_units);
        let mut dc_next = Array1::<R>::zeros(h_units);
        let one = R::one();
        for t in (0..steps).rev() {
            let gates = cache.gates.row(t);
            let mut dz_t = dz.row_mut(t);
            for k in 0..h_units {
                let (i, f, g, o) = (
                    gates[k],
                    gates[h_units + k],
                    gates[2 * h_units + k],
                    gates[3 * h_units + k],
                );
                let c = cache.cells[[t, k]];
                let c_prev = if t > 0 { cache.cells[[t - 1, k]] } else { R::zero() };
                let tc = c.tanh();
                let dh = d_hidden[[t, k]] + dh_next[k];
                let d_o = dh * tc;
                let dc = dh * o * (one - tc * tc) + dc_next[k];
                dz_t[k] = dc * g * i * (one - i);
                dz_t[h_units + k] = dc * c_prev * f * (one - f);
                dz_t[2 * h_units + k] = dc * i * (one - g * g);
                dz_t[3 * h_units + k] = d_o * o * (one - o);
                dc_next[k] = dc * f;
            }
            // dh_{t-1} = W_h dz_t
            for j in 0..h_units {
                dh_next[j] = self.recurrent_weight.row(j).dot(&dz_t);
            }
        }
        if steps > 1 {
            let h_prev = cache.hidden.slice(s![..steps - 1, ..]);
            grads.recurrent_weight += &h_prev.t().dot(&dz.slice(s![1.., ..]));
        }
        grads.input_weight += &x.t().dot(&dz);
        grads.bias += &dz.sum_axis(Axis(0));
        dz.dot(&self.input_weight.t())
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, R>)) {
        f(&format!("{prefix}.input_weight"), self.input_weight.view().into_dyn());
        f(&format!("{prefix}.recurrent_weight"), self.recurrent_weight.view().into_dyn());
        f(&format!("{prefix}.bias"), self.bias.view().into_dyn());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, R>)) {
        f(&format!("{prefix}.input_weight"), self.input_weight.view_mut().into_dyn());
        f(&format!("{prefix}.recurrent_weight"), self.recurrent_weight.view_mut().into_dyn());
        f(&format!("{prefix}.bias"), self.bias.view_mut().into_dyn());
    }
}

fn reversed<R: Real>(x: ArrayView2<'_, R>) -> Array2<R> {
    x.slice(s![..;-1, ..]).to_owned()
}

/// Forward and time-reversed LSTM whose outputs are concatenated (`T x 2H`).
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm<R: Real> {
    pub forward_dir: LstmDirection<R>,
    pub backward_dir: LstmDirection<R>,
}

#[derive(Clone, Debug)]
pub struct BiLstmCache<R: Real> {
    input: Array2<R>,
    fwd: DirectionCache<R>,
    bwd: DirectionCache<R>,
}

impl<R: Real> BiLstm<R> {
    pub fn init(inputs: usize, units: usize, rng: &mut impl Rng) -> Self {
        Self {
            forward_dir: LstmDirection::init(inputs, units, rng),
            backward_dir: LstmDirection::init(inputs, units, rng),
        }
    }

    pub fn units(&self) -> usize {
        self.forward_dir.units()
    }

    pub fn forward(&self, x: ArrayView2<'_, R>) -> (Array2<R>, BiLstmCache<R>) {
        let h = self.units();
        let (hf, fwd) = self.forward_dir.forward(x);
        let x_rev = reversed(x);
        let (hb_rev, bwd) = self.backward_dir.forward(x_rev.view());
        let mut out = Array2::zeros((x.nrows(), 2 * h));
        out.slice_mut(s![.., ..h]).assign(&hf);
        out.slice_mut(s![.., h..]).assign(&hb_rev.slice(s![..;-1, ..]));
        (
            out,
            BiLstmCache {
                input: x.to_owned(),
                fwd,
                bwd,
            },
        )
    }

    pub fn backward(&self, cache: &BiLstmCache<R>, d_out: ArrayView2<'_, R>, grads: &mut Self) -> Array2<R> {
        let h = self.units();
        let dx_f = self.forward_dir.backward(
            cache.input.view(),
            &cache.fwd,
            d_out.slice(s![.., ..h]),
            &mut grads.forward_dir,
        );
        let x_rev = reversed(cache.input.view());
        let d_rev = reversed(d_out.slice(s![.., h..]));
        let dx_b_rev = self
            .backward_dir
            .backward(x_rev.view(), &cache.bwd, d_rev.view(), &mut grads.backward_dir);
        dx_f + dx_b_rev.slice(s![..;-1, ..])
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, R>)) {
        self.forward_dir.visit(&format!("{prefix}.fwd"), f);
        self.backward_dir.visit(&format!("{prefix}.bwd"), f);
    }

    pub(crate) fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, R>)) {
        self.forward_dir.visit_mut(&format!("{prefix}.fwd"), f);
        self.backward_dir.visit_mut(&format!("{prefix}.bwd"), f);
    }
}
