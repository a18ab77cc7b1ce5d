use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;

/// Noise colour, named by the exponent `e` of its power spectral density
/// `S(f) ~ f^e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseColor {
    White,
    Pink,
    Brown,
    Blue,
    Violet,
}

impl NoiseColor {
    pub const ALL: [NoiseColor; 5] = [
        NoiseColor::White,
        NoiseColor::Pink,
        NoiseColor::Brown,
        NoiseColor::Blue,
        NoiseColor::Violet,
    ];

    pub fn exponent(self) -> f64 {
        match self {
            NoiseColor::White => 0.0,
            NoiseColor::Pink => -1.0,
            NoiseColor::Brown => -2.0,
            NoiseColor::Blue => 1.0,
            NoiseColor::Violet => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseColor::White => "white",
            NoiseColor::Pink => "pink",
            NoiseColor::Brown => "brown",
            NoiseColor::Blue => "blue",
            NoiseColor::Violet => "violet",
        }
    }
}

/// Zero-mean, unit-variance noise with the colour's spectral slope.
///
/// White Gaussian noise is transformed to the frequency domain, each bin is
/// scaled by `|f|^(e/2)` with the DC bin zeroed, and the inverse transform is
/// renormalized.
pub fn colored_noise(color: NoiseColor, length: usize, seed: u64) -> Result<Vec<f64>> {
    if length < 16 {
        return Err(invalid!("colored noise needs at least 16 samples, got {length}"));
    }
    let mut r = rng::rng(seed);
    let mut spectrum: Vec<Complex<f64>> = (0..length)
        .map(|_| Complex::new(StandardNormal.sample(&mut r), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(length).process(&mut spectrum);
    let half_exp = color.exponent() / 2.0;
    spectrum[0] = Complex::new(0.0, 0.0);
    for (k, bin) in spectrum.iter_mut().enumerate().skip(1) {
        let f = k.min(length - k) as f64;
        *bin *= f.powf(half_exp);
    }
    planner.plan_fft_inverse(length).process(&mut spectrum);
    let mut out: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    let n = length as f64;
    let mean = out.iter().sum::<f64>() / n;
    let std = (out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    out.iter_mut().for_each(|v| *v = (*v - mean) / std);
    Ok(out)
}
