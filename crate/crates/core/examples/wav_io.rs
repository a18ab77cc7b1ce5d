//! Writes a synthetic utterance as 16-bit PCM, reads it back and reports the
//! quantization error and clipping count.
//!
//! Run with: cargo run --release --example wav_io

use speaker_mi::corpus::{load_wav, make_profiles, save_wav, synth_utterance, GenerateParams};

fn main() -> speaker_mi::Result<()> {
    let params = GenerateParams::default();
    let profile = &make_profiles(&params)?[0];
    let mut audio = synth_utterance(profile, 42, 1.0, params.sample_rate);
    audio[100] = 1.7;

    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("utt.wav");
    let clipped = save_wav(&path, &audio, params.sample_rate)?;
    let (back, rate) = load_wav(&path)?;

    let err = audio
        .iter()
        .zip(&back)
        .enumerate()
        .filter(|(i, _)| *i != 100)
        .map(|(_, (a, b))| (a - b).abs())
        .fold(0.0, f64::max);
    println!("{} samples at {rate} Hz, {clipped} clipped", back.len());
    println!("max round-trip error {err:.2e} (one step is {:.2e})", 1.0 / 32768.0);
    println!("sample 100 reads back as {:.4}", back[100]);
    Ok(())
}
