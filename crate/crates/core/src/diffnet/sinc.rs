//! Parameterized band-pass kernels for the learnable front end.
//!
//! A kernel is the difference of two low-pass sinc responses (cutoffs `f1`
//! and `f2`) multiplied by a Hamming window. The learnable parameters are two
//! unconstrained reals per filter, mapped through logistic squashes so that
//! `min_low_hz < f1 < f2 < nyquist` always holds.

use std::f64::consts::PI;

pub const MIN_LOW_HZ: f64 = 30.0;
pub const NYQUIST_MARGIN_HZ: f64 = 50.0;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Cutoff pair in Hz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub low_hz: f64,
    pub high_hz: f64,
}

/// Partial derivatives of a [`Band`] with respect to the raw parameters.
#[derive(Clone, Copy, Debug)]
pub struct BandJacobian {
    pub dlow_da: f64,
    pub dhigh_da: f64,
    pub dhigh_db: f64,
}

fn low_range(sample_rate: f64) -> (f64, f64) {
    (MIN_LOW_HZ, sample_rate / 2.0 - NYQUIST_MARGIN_HZ)
}

/// Maps raw parameters `(a, b)` to cutoffs:
/// `f1 = lo + (hi - lo) * sigmoid(a)`, `f2 = f1 + (nyquist - f1) * sigmoid(b)`.
pub fn band_from_raw(a: f64, b: f64, sample_rate: f64) -> (Band, BandJacobian) {
    let nyquist = sample_rate / 2.0;
    let (lo, hi) = low_range(sample_rate);
    let sa = sigmoid(a);
    let sb = sigmoid(b);
    let low = lo + (hi - lo) * sa;
    let room = nyquist - low;
    let high = low + room * sb;
    let dlow_da = (hi - lo) * sa * (1.0 - sa);
    (
        Band {
            low_hz: low,
            high_hz: high,
        },
        BandJacobian {
            dlow_da,
            dhigh_da: dlow_da * (1.0 - sb),
            dhigh_db: room * sb * (1.0 - sb),
        },
    )
}

/// Inverse of [`band_from_raw`]; the band must satisfy the cutoff invariant.
pub fn raw_from_band(band: Band, sample_rate: f64) -> (f64, f64) {
    let nyquist = sample_rate / 2.0;
    let (lo, hi) = low_range(sample_rate);
    let a = logit((band.low_hz - lo) / (hi - lo));
    let b = logit((band.high_hz - band.low_hz) / (nyquist - band.low_hz));
    (a, b)
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Initial bands: adjacent intervals evenly spaced on the mel scale.
pub fn mel_bands(n_filters: usize, sample_rate: f64) -> Vec<Band> {
    let (lo, _) = low_range(sample_rate);
    let top = sample_rate / 2.0 - 2.0 * NYQUIST_MARGIN_HZ;
    let (m_lo, m_hi) = (hz_to_mel(lo + 1.0), hz_to_mel(top));
    let edges: Vec<f64> = (0..=n_filters)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / n_filters as f64))
        .collect();
    edges
        .windows(2)
        .map(|w| Band {
            low_hz: w[0],
            high_hz: w[1],
        })
        .collect()
}

/// Hamming-windowed band-pass kernel of odd length `len`, symmetric about its
/// center. Equal cutoffs give the zero kernel.
pub fn band_pass_kernel(band: Band, sample_rate: f64, len: usize) -> Vec<f64> {
    let half = (len / 2) as f64;
    let f1 = band.low_hz / sample_rate;
    let f2 = band.high_hz / sample_rate;
    (0..len)
        .map(|j| {
            let n = (j as f64 - half).abs();
            hamming(n, len) * (low_pass(f2, n) - low_pass(f1, n))
        })
        .collect()
}

/// Derivatives of every kernel tap with respect to the low and high cutoff
/// (per Hz).
pub fn band_pass_kernel_partials(band: Band, sample_rate: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let half = (len / 2) as f64;
    let f1 = band.low_hz / sample_rate;
    let f2 = band.high_hz / sample_rate;
    let mut d_low = Vec::with_capacity(len);
    let mut d_high = Vec::with_capacity(len);
    for j in 0..len {
        let n = (j as f64 - half).abs();
        let w = hamming(n, len) / sample_rate;
        // d/df [2f sinc(2 pi f n)] = 2 cos(2 pi f n)
        d_high.push(w * 2.0 * (2.0 * PI * f2 * n).cos());
        d_low.push(-w * 2.0 * (2.0 * PI * f1 * n).cos());
    }
    (d_low, d_high)
}

// 2f * sinc(2 pi f n), with f normalized by the sample rate.
fn low_pass(f: f64, n: f64) -> f64 {
    if n == 0.0 {
        2.0 * f
    } else {
        (2.0 * PI * f * n).sin() / (PI * n)
    }
}

// Hamming window indexed by distance from the center.
fn hamming(n_from_center: f64, len: usize) -> f64 {
    0.54 + 0.46 * (2.0 * PI * n_from_center / (len - 1) as f64).cos()
}
