//! 16-bit PCM mono RIFF/WAVE reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Mono audio with samples in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sample {i} = {} outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Clamps into `[-1, 1]`; non-finite samples become zero.
    pub fn from_clamped(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let s = samples
            .into_iter()
            .map(|v| if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 })
            .collect();
        Self::new(s, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.samples.len() {
            return Err(Error::InvalidArgument(format!(
                "slice {start}+{len} beyond {} samples",
                self.samples.len()
            )));
        }
        Ok(Self {
            samples: self.samples[start..start + len].to_vec(),
            sample_rate: self.sample_rate,
        })
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

pub fn sample_to_i16(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn i16_to_sample(v: i16) -> f64 {
    v as f64 / 32768.0
}

pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = (w.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &w.samples {
        out.extend_from_slice(&sample_to_i16(s).to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    let bad = |m: &str| Error::Wav(m.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("malformed header: not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("malformed header: chunk runs past end of file"))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(bad("malformed header: short fmt chunk"));
                }
                format = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => {
                let (fmt, channels, rate, bits) =
                    format.ok_or_else(|| bad("malformed header: data before fmt"))?;
                if fmt != 1 || bits != 16 {
                    return Err(bad(&format!(
                        "unsupported encoding: format {fmt}, {bits} bits (need PCM16)"
                    )));
                }
                if channels != 1 {
                    return Err(bad(&format!("{channels} channels, only mono is supported")));
                }
                if size % 2 != 0 {
                    return Err(bad("malformed data: odd byte count"));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16_to_sample(i16::from_le_bytes([c[0], c[1]])))
                    .collect();
                return Waveform::new(samples, rate);
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err(bad("malformed header: no data chunk"))
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    decode_wav(&fs::read(path)?)
}

pub fn save_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    fs::write(path, encode_wav(w))?;
    Ok(())
}
