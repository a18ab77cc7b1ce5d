//! 16-bit PCM mono WAV reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

const SCALE: f64 = 32767.0;

/// Encodes samples as a 16-bit PCM mono WAV image. Values outside [-1, 1]
/// are hard-clipped; the number of clipped samples is returned alongside.
pub fn encode_wav(samples: &[f64], sample_rate: u32) -> (Vec<u8>, usize) {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    let mut clipped = 0;
    for &s in samples {
        let c = if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) };
        if c != s {
            clipped += 1;
        }
        out.extend_from_slice(&((c * SCALE).round() as i16).to_le_bytes());
    }
    (out, clipped)
}

/// Parses a 16-bit PCM mono WAV image into samples in [-1, 1] and the
/// sample rate.
pub fn decode_wav(bytes: &[u8]) -> Result<(Vec<f64>, u32)> {
    if bytes.len() < 12 {
        return Err(format_err(0, "file too short for a RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(format_err(0, "missing RIFF tag"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(format_err(8, "missing WAVE tag"));
    }
    let mut pos = 12;
    let mut fmt: Option<(u32, usize)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().expect("4 bytes")) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| format_err(pos + 4, format!("chunk length {len} runs past end of file")))?;
        match id {
            b"fmt " => {
                if len < 16 {
                    return Err(format_err(pos + 4, "fmt chunk shorter than 16 bytes"));
                }
                let u16_at = |o: usize| u16::from_le_bytes([bytes[body + o], bytes[body + o + 1]]);
                let format = u16_at(0);
                let channels = u16_at(2);
                let rate = u32::from_le_bytes(bytes[body + 4..body + 8].try_into().expect("4 bytes"));
                let bits = u16_at(14);
                if format != 1 && format != 0xFFFE {
                    return Err(format_err(body, format!("unsupported audio format {format}, expected PCM")));
                }
                if channels != 1 {
                    return Err(format_err(
                        body + 2,
                        format!("expected mono audio, found {channels} channels"),
                    ));
                }
                if bits != 16 {
                    return Err(format_err(
                        body + 14,
                        format!("unsupported bit depth {bits}, expected 16"),
                    ));
                }
                fmt = Some((rate, body));
            }
            b"data" => {
                if fmt.is_none() {
                    return Err(format_err(pos, "data chunk before fmt chunk"));
                }
                if len % 2 != 0 {
                    return Err(format_err(pos + 4, "odd data length for 16-bit samples"));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / SCALE)
                    .map(|v| v.max(-1.0))
                    .collect();
                return Ok((samples, fmt.expect("checked").0));
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = end + (len & 1);
    }
    Err(format_err(pos, "no data chunk found"))
}

/// Writes samples as 16-bit PCM mono; returns the number of clipped samples.
pub fn save_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<usize> {
    let (bytes, clipped) = encode_wav(samples, sample_rate);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(clipped)
}

pub fn load_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}
