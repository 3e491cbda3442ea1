//! 2-D convolution over `T x F` feature maps with zero "same" padding.
//!
//! Activations are stored channel-last as a `(T * F) x C` matrix, row
//! `t * F + f`. The convolution is evaluated as im2col followed by a matrix
//! product, in row chunks so the column buffer stays bounded for long inputs.
//! Column layout is `(dy, dx, c)` with `c` fastest.
//!
//! With spectral normalization on, the effective kernel is `W / sigma` where
//! `sigma = u^T W v` and `u`, `v` are power-iteration estimates of the leading
//! singular vectors. They are buffers, not parameters: gradients flow through
//! `sigma` with `u` and `v` held fixed, and [`Conv2d::power_iteration`]
//! refreshes them.

use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{cast, uniform_fan_in, Real};

const CHUNK_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<R: Real> {
    /// `(k * k * in) x out`
    pub weight: Array2<R>,
    pub bias: Array1<R>,
    pub kernel: usize,
    pub in_channels: usize,
    pub spectral_norm: Option<SpectralState<R>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState<R: Real> {
    /// Left singular vector estimate, length `k * k * in`.
    pub u: Array1<R>,
    /// Right singular vector estimate, length `out`.
    pub v: Array1<R>,
}

fn normalized<R: Real>(x: Array1<R>) -> Array1<R> {
    let n = x.dot(&x).sqrt();
    let eps: R = cast(1e-12);
    x.mapv(|v| v / (n + eps))
}

impl<R: Real> Conv2d<R> {
    pub fn init(in_channels: usize, out_channels: usize, kernel: usize, spectral_norm: bool, rng: &mut impl Rng) -> Self {
        assert!(kernel % 2 == 1, "kernel size must be odd for same padding");
        let fan_in = kernel * kernel * in_channels;
        let weight = uniform_fan_in((fan_in, out_channels), fan_in, rng);
        let spectral_norm = spectral_norm.then(|| {
            let u = Array1::from_shape_fn(fan_in, |_| cast::<R>(rng.sample::<f64, _>(StandardNormal)));
            let v = Array1::from_shape_fn(out_channels, |_| cast::<R>(rng.sample::<f64, _>(StandardNormal)));
            SpectralState {
                u: normalized(u),
                v: normalized(v),
            }
        });
        let mut conv = Self {
            weight,
            bias: Array1::zeros(out_channels),
            kernel,
            in_channels,
            spectral_norm,
        };
        for _ in 0..20 {
            conv.power_iteration();
        }
        conv
    }

    pub fn out_channels(&self) -> usize {
        self.weight.ncols()
    }

    /// One power-iteration step on the singular vector estimates.
    pub fn power_iteration(&mut self) {
        if let Some(state) = self.spectral_norm.as_mut() {
            state.v = normalized(self.weight.t().dot(&state.u));
            state.u = normalized(self.weight.dot(&state.v));
        }
    }

    /// Current spectral-norm estimate (1 when normalization is off).
    pub fn sigma(&self) -> R {
        match &self.spectral_norm {
            Some(state) => state.u.dot(&self.weight.dot(&state.v)),
            None => R::one(),
        }
    }

    fn effective_weight(&self) -> Array2<R> {
        match &self.spectral_norm {
            Some(_) => {
                let sigma = self.sigma();
                self.weight.mapv(|w| w / sigma)
            }
            None => self.weight.clone(),
        }
    }

    /// Valid `(ff_start, dx_start, count)` run of kernel columns for output bin `f`.
    fn column_run(&self, f: usize, bins: usize) -> (usize, usize, usize) {
        let half = self.kernel / 2;
        let lo = f.saturating_sub(half);
        let hi = (f + half + 1).min(bins);
        (lo, lo + half - f, hi - lo)
    }

    fn im2col(&self, x: &[R], frames: usize, bins: usize, rows: std::ops::Range<usize>, cols: &mut [R]) {
        let k = self.kernel;
        let half = k / 2;
        let c_in = self.in_channels;
        let width = k * k * c_in;
        cols.fill(R::zero());
        for (r, p) in rows.enumerate() {
            let (t, f) = (p / bins, p % bins);
            let (ff, dx0, count) = self.column_run(f, bins);
            let out_row = &mut cols[r * width..(r + 1) * width];
            for dy in 0..k {
                let Some(tt) = (t + dy).checked_sub(half).filter(|&tt| tt < frames) else {
                    continue;
                };
                let src = (tt * bins + ff) * c_in;
                let dst = (dy * k + dx0) * c_in;
                out_row[dst..dst + count * c_in].copy_from_slice(&x[src..src + count * c_in]);
            }
        }
    }

    fn col2im_add(&self, d_cols: &[R], frames: usize, bins: usize, rows: std::ops::Range<usize>, dx_out: &mut [R]) {
        let k = self.kernel;
        let half = k / 2;
        let c_in = self.in_channels;
        let width = k * k * c_in;
        for (r, p) in rows.enumerate() {
            let (t, f) = (p / bins, p % bins);
            let (ff, dx0, count) = self.column_run(f, bins);
            let row = &d_cols[r * width..(r + 1) * width];
            for dy in 0..k {
                let Some(tt) = (t + dy).checked_sub(half).filter(|&tt| tt < frames) else {
                    continue;
                };
                let dst = (tt * bins + ff) * c_in;
                let src = (dy * k + dx0) * c_in;
                for (d, &g) in dx_out[dst..dst + count * c_in].iter_mut().zip(&row[src..src + count * c_in]) {
                    *d += g;
                }
            }
        }
    }

    /// `x` is `(frames * bins) x in_channels`; returns pre-activations.
    pub fn forward(&self, x: ArrayView2<'_, R>, frames: usize, bins: usize) -> Array2<R> {
        let pixels = frames * bins;
        debug_assert_eq!(x.dim(), (pixels, self.in_channels));
        let w = self.effective_weight();
        let x = x.as_standard_layout();
        let x = x.as_slice().expect("standard layout");
        let mut out = Array2::zeros((pixels, self.out_channels()));
        let mut cols = Array2::zeros((CHUNK_ROWS.min(pixels), w.nrows()));
        for start in (0..pixels).step_by(CHUNK_ROWS) {
            let end = (start + CHUNK_ROWS).min(pixels);
            let mut c = cols.slice_mut(s![..end - start, ..]);
            self.im2col(x, frames, bins, start..end, c.as_slice_mut().expect("contiguous rows"));
            ndarray::linalg::general_mat_mul(R::one(), &c, &w, R::zero(), &mut out.slice_mut(s![start..end, ..]));
        }
        out += &self.bias;
        out
    }

    /// Given the layer input and `dL/d(pre-activation)`, accumulates parameter
    /// gradients (when `grads` is given) and returns `dL/dx` (when asked).
    pub fn backward(
        &self,
        x: ArrayView2<'_, R>,
        frames: usize,
        bins: usize,
        d_out: &Array2<R>,
        grads: Option<&mut Self>,
        want_input_grad: bool,
    ) -> Option<Array2<R>> {
        let pixels = frames * bins;
        let w = self.effective_weight();
        let mut d_w = grads.as_ref().map(|_| Array2::<R>::zeros(w.raw_dim()));
        let mut d_x = want_input_grad.then(|| Array2::<R>::zeros((pixels, self.in_channels)));
        let x = x.as_standard_layout();
        let x = x.as_slice().expect("standard layout");
        let mut cols = Array2::zeros((CHUNK_ROWS.min(pixels), w.nrows()));
        for start in (0..pixels).step_by(CHUNK_ROWS) {
            let end = (start + CHUNK_ROWS).min(pixels);
            let d_chunk = d_out.slice(s![start..end, ..]);
            if let Some(dw) = d_w.as_mut() {
                let mut c = cols.slice_mut(s![..end - start, ..]);
                self.im2col(x, frames, bins, start..end, c.as_slice_mut().expect("contiguous rows"));
                ndarray::linalg::general_mat_mul(R::one(), &c.t(), &d_chunk, R::one(), dw);
            }
            if let Some(dx) = d_x.as_mut() {
                let mut d_cols = cols.slice_mut(s![..end - start, ..]);
                ndarray::linalg::general_mat_mul(R::one(), &d_chunk, &w.t(), R::zero(), &mut d_cols);
                let dx = dx.as_slice_mut().expect("fresh array");
                self.col2im_add(d_cols.as_slice().expect("contiguous rows"), frames, bins, start..end, dx);
            }
        }
        if let (Some(g), Some(dw_eff)) = (grads, d_w) {
            g.bias += &d_out.sum_axis(Axis(0));
            match &self.spectral_norm {
                Some(state) => {
                    // W_eff = W / sigma, sigma = u^T W v
                    let sigma = self.sigma();
                    let inner = Zip::from(&dw_eff)
                        .and(&self.weight)
                        .fold(R::zero(), |acc, &a, &b| acc + a * b);
                    let coeff = inner / (sigma * sigma);
                    Zip::from(&mut g.weight)
                        .and(&dw_eff)
                        .and(state.u.view().insert_axis(Axis(1)).broadcast(dw_eff.raw_dim()).unwrap())
                        .and(state.v.view().insert_axis(Axis(0)).broadcast(dw_eff.raw_dim()).unwrap())
                        .for_each(|gw, &de, &ui, &vj| *gw += de / sigma - coeff * ui * vj);
                }
                None => g.weight += &dw_eff,
            }
        }
        d_x
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
