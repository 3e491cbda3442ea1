//! Rational-ratio resampling with a Kaiser-windowed sinc low-pass.
//!
//! For a conversion `from -> to` reduced to `up / down`, the anti-aliasing
//! filter is designed at the upsampled rate with its stopband edge at
//! `1 / (2 max(up, down))` cycles per sample (the lower of the two Nyquist
//! frequencies), a transition width of one tenth of that, and 60 dB of
//! stopband rejection. The filter is normalized to unit DC gain and scaled by
//! `up`, so a constant input stays constant. Output sample `m` is
//! `sum_n x[n] h[m down - n up + L]` for the centered filter of half-length `L`,
//! which yields `ceil(len * up / down)` samples with zero group delay.

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Reduced `(up, down)` factors for converting `from` Hz to `to` Hz.
pub fn ratio(from: u32, to: u32) -> (usize, usize) {
    let g = gcd(from as u64, to as u64);
    ((to as u64 / g) as usize, (from as u64 / g) as usize)
}

/// Anti-aliasing filter for an `up / down` conversion, length `2 L + 1`.
pub fn design_filter(up: usize, down: usize) -> Vec<f64> {
    let rejection_db = 60.0;
    let cutoff = 1.0 / (2.0 * up.max(down) as f64);
    let roll_off = cutoff / 10.0;
    let half_len = ((rejection_db - 8.0) / (28.714 * roll_off)).ceil() as i64;
    let beta = 0.1102 * (rejection_db - 8.7);
    let denom = bessel_i0(beta);
    let n = (2 * half_len + 1) as usize;
    let mut h: Vec<f64> = (-half_len..=half_len)
        .map(|t| {
            let ideal = 2.0 * up as f64 * cutoff * sinc(2.0 * cutoff * t as f64);
            let r = t as f64 / half_len as f64;
            let kaiser = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom;
            ideal * kaiser
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in h.iter_mut() {
        *v *= up as f64 / sum;
    }
    debug_assert_eq!(h.len(), n);
    h
}

/// Resamples `x` from `from` Hz to `to` Hz.
pub fn resample(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || x.is_empty() {
        return x.to_vec();
    }
    let (up, down) = ratio(from, to);
    let h = design_filter(up, down);
    let half = (h.len() / 2) as i64;
    let out_len = (x.len() * up).div_ceil(down);
    let (up_i, down_i) = (up as i64, down as i64);
    let n_in = x.len() as i64;
    (0..out_len as i64)
        .map(|m| {
            // taps where 0 <= m*down - n*up + half < h.len()
            let centre = m * down_i + half;
            let n_lo = ((centre - (h.len() as i64 - 1)) as f64 / up_i as f64).ceil() as i64;
            let n_hi = (centre as f64 / up_i as f64).floor() as i64;
            let mut acc = 0.0;
            for n in n_lo.max(0)..=n_hi.min(n_in - 1) {
                acc += x[n as usize] * h[(centre - n * up_i) as usize];
            }
            acc
        })
        .collect()
}
