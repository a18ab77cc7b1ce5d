//! Synthetic voiced-speech stand-in.
//!
//! Each utterance is a stack of up to 12 harmonics of the speaker's
//! fundamental, shaped by three formant resonances, with slow vibrato, a
//! random amplitude envelope, two short pauses and low-level coloured noise
//! at roughly 20 dB SNR.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::SpeakerProfile;
use crate::rng::{self, derive_seed};

const N_HARMONICS: usize = 12;
const VIBRATO_DEPTH: f64 = 0.006;
const FORMANT_GAINS: [f64; 3] = [1.0, 0.7, 0.4];
const FORMANT_WIDTHS_HZ: [f64; 3] = [90.0, 120.0, 160.0];
const PAUSE_FRACTION: f64 = 0.05;
const PEAK: f64 = 0.8;
const SNR_DB: f64 = 20.0;

fn formant_gain(profile: &SpeakerProfile, freq: f64) -> f64 {
    profile
        .formant_centers_hz
        .iter()
        .zip(FORMANT_GAINS.iter().zip(FORMANT_WIDTHS_HZ))
        .map(|(&fc, (&g, bw))| g / (1.0 + ((freq - fc) / bw).powi(2)))
        .sum::<f64>()
        .min(1.0)
}

/// Harmonic amplitudes: the fundamental always dominates.
fn harmonic_amplitudes(profile: &SpeakerProfile, nyquist: f64) -> Vec<f64> {
    (1..=N_HARMONICS)
        .take_while(|&h| h as f64 * profile.fundamental_hz * (1.0 + VIBRATO_DEPTH) < nyquist - 100.0)
        .map(|h| {
            let f = h as f64 * profile.fundamental_hz;
            (0.5 + 0.5 * formant_gain(profile, f)) / (h as f64).powf(1.2)
        })
        .collect()
}

/// Renders one utterance of `seconds` length. Deterministic in
/// `(profile, utterance_seed, seconds, sample_rate)`; peak magnitude 0.8.
pub fn synth_utterance(
    profile: &SpeakerProfile,
    utterance_seed: u64,
    seconds: f64,
    sample_rate: u32,
) -> Vec<f64> {
    let sr = sample_rate as f64;
    let n = (seconds * sr).round() as usize;
    if n == 0 {
        return Vec::new();
    }
    let mut r = rng::rng(derive_seed(profile.seed, utterance_seed));
    let amps = harmonic_amplitudes(profile, sr / 2.0);
    let phases: Vec<f64> = amps.iter().map(|_| r.gen::<f64>() * 2.0 * PI).collect();
    let vib_phase = r.gen::<f64>() * 2.0 * PI;
    let env: Vec<(f64, f64)> = (0..3)
        .map(|_| (0.5 + 2.5 * r.gen::<f64>(), r.gen::<f64>() * 2.0 * PI))
        .collect();

    // Two pauses, one in each half.
    let gap = (PAUSE_FRACTION * n as f64) as usize;
    let half = n / 2;
    let pauses: Vec<usize> = (0..2)
        .map(|i| {
            let room = half.saturating_sub(gap);
            i * half + (r.gen::<f64>() * room as f64) as usize
        })
        .collect();
    let fade = ((0.01 * sr) as usize).max(1);
    let gate = |t: usize| -> f64 {
        let mut g: f64 = 1.0;
        for &p in &pauses {
            let end = p + gap;
            let d = if t < p {
                p - t
            } else if t >= end {
                t - end + 1
            } else {
                0
            };
            if d < fade {
                g = g.min(0.5 - 0.5 * (PI * d as f64 / fade as f64).cos());
            }
        }
        g
    };

    let mut voice = Vec::with_capacity(n);
    let mut phase = 0.0;
    let f0 = profile.fundamental_hz;
    let vib_w = 2.0 * PI * profile.vibrato_rate_hz / sr;
    for t in 0..n {
        let ts = t as f64 / sr;
        let inst = f0 * (1.0 + VIBRATO_DEPTH * (vib_w * t as f64 + vib_phase).sin());
        phase += 2.0 * PI * inst / sr;
        let e = env
            .iter()
            .map(|(f, p)| (2.0 * PI * f * ts + p).sin())
            .sum::<f64>()
            / 3.0;
        let envelope = 0.65 + 0.35 * e;
        let s: f64 = amps
            .iter()
            .zip(&phases)
            .enumerate()
            .map(|(h, (a, p))| a * ((h + 1) as f64 * phase + p).sin())
            .sum();
        voice.push(s * envelope * gate(t));
    }

    let rms = (voice.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let noise_rms = rms / 10f64.powf(SNR_DB / 20.0);
    // One-pole low-passed white noise, rescaled to the target level.
    let mut noise = Vec::with_capacity(n);
    let mut state = 0.0;
    for _ in 0..n {
        let w: f64 = StandardNormal.sample(&mut r);
        state = 0.6 * state + w;
        noise.push(state);
    }
    let nr = (noise.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let mut out: Vec<f64> = voice
        .iter()
        .zip(&noise)
        .map(|(v, w)| v + w * noise_rms / nr.max(f64::MIN_POSITIVE))
        .collect();
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= PEAK / peak);
    }
    out
}
