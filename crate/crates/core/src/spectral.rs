//! Zero-padded DFT filtering of uniformly sampled complex signals.
//!
//! Forward transforms use the e^{−iωt} kernel, so a causal impulse response
//! h(t) has transfer function H(ω) = ∫h(t)e^{−iωt}dt. Angular frequencies
//! follow the FFT bin order with negative frequencies in the upper half.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

/// Padded length used for a record of `n` samples: next power of two ≥ 8n.
pub fn padded_len(n: usize) -> usize {
    (8 * n.max(1)).next_power_of_two()
}

/// Angular frequency of FFT bin `k` for `n` bins spaced `dt`.
pub fn bin_omega(k: usize, n: usize, dt: f64) -> f64 {
    let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * PI * kk / (n as f64 * dt)
}

/// Forward DFT of `x` zero-padded to `n`.
pub fn spectrum(x: &[C64], n: usize) -> Vec<C64> {
    let mut buf = vec![C64::new(0.0, 0.0); n];
    buf[..x.len()].copy_from_slice(x);
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

/// Inverse DFT normalized so that `inverse(spectrum(x)) == x`.
pub fn inverse(mut s: Vec<C64>) -> Vec<C64> {
    let n = s.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut s);
    let inv = 1.0 / n as f64;
    s.iter_mut().for_each(|z| *z *= inv);
    s
}

/// Apply the transfer function `h(ω)` to `x` sampled at `dt`. Returns the
/// full padded record (length [`padded_len`]) so that no filtered energy is
/// discarded.
pub fn filter<F: Fn(f64) -> C64>(x: &[C64], dt: f64, h: F) -> Vec<C64> {
    let n = padded_len(x.len());
    let mut s = spectrum(x, n);
    for (k, z) in s.iter_mut().enumerate() {
        *z *= h(bin_omega(k, n, dt));
    }
    inverse(s)
}

/// Σ|x|² over all samples.
pub fn energy(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}
