//! Reference STOI written directly from the published algorithm description,
//! sharing no code with the library: explicit zero-stuffing resampler, direct
//! DFT, and segment matrices built as nested vectors.

use std::f64::consts::PI;

const FS: f64 = 10_000.0;
const WIN: usize = 256;
const NFFT: usize = 512;
const HOP: usize = 128;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const N: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn i0(x: f64) -> f64 {
    // sum_k ((x/2)^k / k!)^2
    let mut total = 0.0;
    let mut fact = 1.0;
    for k in 0..60 {
        if k > 0 {
            fact *= k as f64;
        }
        let t = (x / 2.0).powi(k) / fact;
        total += t * t;
    }
    total
}

/// Kaiser-windowed ideal low-pass for a `p/q` conversion (60 dB rejection).
fn resample_window(p: usize, q: usize) -> Vec<f64> {
    let stop = 1.0 / (2.0 * p.max(q) as f64);
    let roll_off = stop / 10.0;
    let rejection = 60.0;
    let l = ((rejection - 8.0) / (28.714 * roll_off)).ceil() as i64;
    let beta = 0.1102 * (rejection - 8.7);
    let m = (2 * l + 1) as f64;
    (-l..=l)
        .enumerate()
        .map(|(n, t)| {
            let arg = 2.0 * stop * t as f64;
            let sinc = if t == 0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
            let ideal = 2.0 * p as f64 * stop * sinc;
            let ratio = 2.0 * n as f64 / (m - 1.0) - 1.0;
            let kaiser = i0(beta * (1.0 - ratio * ratio).sqrt()) / i0(beta);
            kaiser * ideal
        })
        .collect()
}

/// Upsample by zero insertion, filter, keep every q-th sample, with the
/// filter delay removed.
fn resample(x: &[f64], from: usize, to: usize) -> Vec<f64> {
    let g = gcd(from, to);
    let (p, q) = (to / g, from / g);
    let h = resample_window(p, q);
    let sum: f64 = h.iter().sum();
    let h: Vec<f64> = h.iter().map(|v| v * p as f64 / sum).collect();
    let half = (h.len() - 1) / 2;
    let mut up = vec![0.0; x.len() * p];
    for (i, v) in x.iter().enumerate() {
        up[i * p] = *v;
    }
    let n_out = (x.len() * p).div_ceil(q);
    (0..n_out)
        .map(|m| {
            let centre = m * q + half;
            let mut acc = 0.0;
            for (j, hj) in h.iter().enumerate() {
                if centre >= j && centre - j < up.len() {
                    acc += hj * up[centre - j];
                }
            }
            acc
        })
        .collect()
}

fn hann_inner(n: usize) -> Vec<f64> {
    // Hann window of length n + 2 with both zero end points removed.
    let m = n + 2;
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (m - 1) as f64).cos())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn frames(x: &[f64], w: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + WIN < x.len() {
        out.push((0..WIN).map(|k| x[i + k] * w[k]).collect());
        i += HOP;
    }
    out
}

fn overlap_add(fr: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; (fr.len() - 1) * HOP + WIN];
    for (j, f) in fr.iter().enumerate() {
        for (k, v) in f.iter().enumerate() {
            out[j * HOP + k] += v;
        }
    }
    out
}

fn remove_silence(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = hann_inner(WIN);
    let xf = frames(x, &w);
    let yf = frames(y, &w);
    let energies: Vec<f64> = xf.iter().map(|f| 20.0 * (norm(f) + EPS).log10()).collect();
    let top = energies.iter().cloned().fold(f64::MIN, f64::max);
    let keep: Vec<usize> = (0..xf.len()).filter(|&i| top - DYN_RANGE - energies[i] < 0.0).collect();
    let xk: Vec<Vec<f64>> = keep.iter().map(|&i| xf[i].clone()).collect();
    let yk: Vec<Vec<f64>> = keep.iter().map(|&i| yf[i].clone()).collect();
    (overlap_add(&xk), overlap_add(&yk))
}

/// Power spectrum per frame: `frames x (NFFT/2 + 1)`, by direct DFT.
fn power_spectra(x: &[f64]) -> Vec<Vec<f64>> {
    let w = hann_inner(WIN);
    let bins = NFFT / 2 + 1;
    let mut cos_t = vec![0.0; bins * WIN];
    let mut sin_t = vec![0.0; bins * WIN];
    for k in 0..bins {
        for n in 0..WIN {
            let a = 2.0 * PI * (k * n % NFFT) as f64 / NFFT as f64;
            cos_t[k * WIN + n] = a.cos();
            sin_t[k * WIN + n] = a.sin();
        }
    }
    frames(x, &w)
        .iter()
        .map(|f| {
            (0..bins)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for n in 0..WIN {
                        re += f[n] * cos_t[k * WIN + n];
                        im -= f[n] * sin_t[k * WIN + n];
                    }
                    re * re + im * im
                })
                .collect()
        })
        .collect()
}

fn third_octave_matrix() -> Vec<Vec<f64>> {
    let bins = NFFT / 2 + 1;
    let f: Vec<f64> = (0..bins).map(|i| i as f64 * FS / NFFT as f64).collect();
    let closest = |target: f64| {
        let mut best = 0;
        for i in 0..bins {
            if (f[i] - target).powi(2) < (f[best] - target).powi(2) {
                best = i;
            }
        }
        best
    };
    (0..BANDS)
        .map(|k| {
            let lo = closest(MIN_FREQ * 2f64.powf((2 * k) as f64 / 6.0 - 1.0 / 6.0));
            let hi = closest(MIN_FREQ * 2f64.powf((2 * k) as f64 / 6.0 + 1.0 / 6.0));
            (0..bins).map(|i| if i >= lo && i < hi { 1.0 } else { 0.0 }).collect()
        })
        .collect()
}

/// `bands x frames` envelopes.
fn envelopes(x: &[f64], obm: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let spec = power_spectra(x);
    obm.iter()
        .map(|band| {
            spec.iter()
                .map(|frame| band.iter().zip(frame).map(|(b, p)| b * p).sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

/// Unclamped STOI of `deg` against `clean`, both at `rate` Hz.
pub fn stoi_reference(clean: &[f64], deg: &[f64], rate: usize) -> f64 {
    assert_eq!(clean.len(), deg.len());
    let (x, y) = if rate == FS as usize {
        (clean.to_vec(), deg.to_vec())
    } else {
        (resample(clean, rate, FS as usize), resample(deg, rate, FS as usize))
    };
    let (x, y) = remove_silence(&x, &y);
    let obm = third_octave_matrix();
    let xt = envelopes(&x, &obm);
    let yt = envelopes(&y, &obm);
    let m_total = xt[0].len();
    assert!(m_total >= N, "too few frames for one segment");
    let clip = 10f64.powf(-BETA_DB / 20.0);
    let mut d = 0.0;
    let mut count = 0;
    for m in N..=m_total {
        for j in 0..BANDS {
            let xs: Vec<f64> = xt[j][m - N..m].to_vec();
            let ys: Vec<f64> = yt[j][m - N..m].to_vec();
            let alpha = norm(&xs) / (norm(&ys) + EPS);
            let yp: Vec<f64> = ys
                .iter()
                .zip(&xs)
                .map(|(yv, xv)| (yv * alpha).min(xv * (1.0 + clip)))
                .collect();
            let ym = yp.iter().sum::<f64>() / N as f64;
            let xm = xs.iter().sum::<f64>() / N as f64;
            let yc: Vec<f64> = yp.iter().map(|v| v - ym).collect();
            let xc: Vec<f64> = xs.iter().map(|v| v - xm).collect();
            let (yn, xn) = (norm(&yc) + EPS, norm(&xc) + EPS);
            d += yc.iter().zip(&xc).map(|(a, b)| (a / yn) * (b / xn)).sum::<f64>();
            count += 1;
        }
    }
    d / count as f64
}
