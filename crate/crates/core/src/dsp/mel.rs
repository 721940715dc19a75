use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stft::Stft;
use super::Waveform;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Analysis parameters of the log-mel front end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub win_length: usize,
    pub hop_length: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            n_fft: 1024,
            win_length: 1024,
            hop_length: 256,
            n_mels: 80,
            f_min: 0.0,
            f_max: 8000.0,
            log_floor: 1e-5,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sample_rate == 0 || self.n_mels == 0 || self.hop_length == 0 {
            return bad("sample_rate, n_mels and hop_length must be positive".into());
        }
        if !(self.hop_length <= self.win_length && self.win_length <= self.n_fft) {
            return bad(format!(
                "need hop {} <= win {} <= n_fft {}",
                self.hop_length, self.win_length, self.n_fft
            ));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= self.sample_rate as f64 / 2.0)
        {
            return bad(format!(
                "need 0 <= f_min {} < f_max {} <= sample_rate/2",
                self.f_min, self.f_max
            ));
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }

    /// Frames produced for `len` samples (zero if shorter than a window).
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.win_length {
            0
        } else {
            1 + (len - self.win_length) / self.hop_length
        }
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop_length as f64
    }
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(f: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    let logstep = 6.4f64.ln() / 27.0;
    if f < 1000.0 {
        f / F_SP
    } else {
        15.0 + (f / 1000.0).ln() / logstep
    }
}

pub fn mel_to_hz(m: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    let logstep = 6.4f64.ln() / 27.0;
    if m < 15.0 {
        m * F_SP
    } else {
        1000.0 * (logstep * (m - 15.0)).exp()
    }
}

/// Triangular mel filterbank stored sparsely: each band keeps its first FFT
/// bin and the run of weights from there.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    pub n_bins: usize,
    /// Band edge frequencies in Hz, `n_mels + 2` points.
    pub edges_hz: Vec<f64>,
    bands: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    /// Slaney band edges with area normalisation: each continuous triangle
    /// has height `2 / (upper − lower)` and unit area in Hz.
    pub fn new(cfg: &MelConfig) -> Self {
        let n_bins = cfg.n_fft / 2 + 1;
        let (m_lo, m_hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
        let edges_hz: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;
        let bands = (0..cfg.n_mels)
            .map(|i| {
                let (lo, mid, hi) = (edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]);
                let norm = 2.0 / (hi - lo);
                let w: Vec<f64> = (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        let up = (f - lo) / (mid - lo);
                        let down = (hi - f) / (hi - mid);
                        up.min(down).max(0.0) * norm
                    })
                    .collect();
                let first = w.iter().position(|&v| v > 0.0).unwrap_or(0);
                let last = w.iter().rposition(|&v| v > 0.0).map_or(first, |l| l + 1);
                (first, w[first..last].to_vec())
            })
            .collect();
        Self {
            n_bins,
            edges_hz,
            bands,
        }
    }

    pub fn n_mels(&self) -> usize {
        self.bands.len()
    }

    /// Dense `[n_mels, n_bins]` weights.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        self.bands
            .iter()
            .map(|(start, w)| {
                let mut row = vec![0.0; self.n_bins];
                row[*start..start + w.len()].copy_from_slice(w);
                row
            })
            .collect()
    }

    pub fn center_hz(&self, band: usize) -> f64 {
        self.edges_hz[band + 1]
    }

    /// `F · s` for one spectrum.
    pub fn apply(&self, spectrum: &[f64], out: &mut [f64]) {
        for ((start, w), o) in self.bands.iter().zip(out.iter_mut()) {
            *o = w.iter().zip(&spectrum[*start..]).map(|(a, b)| a * b).sum();
        }
    }

    /// `Fᵀ · e` for one band-energy vector.
    pub fn apply_transpose(&self, energies: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for ((start, w), e) in self.bands.iter().zip(energies) {
            for (o, wk) in out[*start..].iter_mut().zip(w) {
                *o += wk * e;
            }
        }
    }
}

/// Log-mel frames `[T, n_mels]` plus the analysis settings.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    pub frames: Tensor,
    pub config: MelConfig,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn n_mels(&self) -> usize {
        self.frames.cols()
    }

    /// Frames `start..start+len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        Ok(Self {
            frames: self.frames.slice_rows(start, len)?,
            config: self.config.clone(),
        })
    }
}

/// Reusable analyser: one FFT plan and filterbank per configuration.
pub struct MelAnalyzer {
    pub config: MelConfig,
    pub stft: Stft,
    pub filterbank: MelFilterbank,
}

impl MelAnalyzer {
    pub fn new(config: &MelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            stft: Stft::new(config.n_fft, config.hop_length, config.win_length),
            filterbank: MelFilterbank::new(config),
            config: config.clone(),
        })
    }

    /// Hann-windowed STFT magnitude → mel filterbank → natural log with
    /// floor `log_floor`.
    pub fn analyze(&self, w: &Waveform) -> Result<MelSpectrogram> {
        if w.sample_rate() != self.config.sample_rate {
            return Err(Error::InvalidArgument(format!(
                "waveform at {} Hz, analyser at {} Hz",
                w.sample_rate(),
                self.config.sample_rate
            )));
        }
        if w.len() < self.config.win_length {
            return Err(Error::InvalidArgument(format!(
                "waveform of {} samples is shorter than one {}-sample window",
                w.len(),
                self.config.win_length
            )));
        }
        let spectra = self.stft.analyze(w.samples());
        let n_mels = self.config.n_mels;
        let floor = self.config.log_floor;
        let mut data = Vec::with_capacity(spectra.len() * n_mels);
        let mut mag = vec![0.0; self.stft.n_bins()];
        let mut band = vec![0.0; n_mels];
        for s in &spectra {
            for (m, c) in mag.iter_mut().zip(s) {
                *m = c.norm();
            }
            self.filterbank.apply(&mag, &mut band);
            data.extend(band.iter().map(|&e| e.max(floor).ln()));
        }
        Ok(MelSpectrogram {
            frames: Tensor::matrix(spectra.len(), n_mels, data)?,
            config: self.config.clone(),
        })
    }
}

pub fn mel_spectrogram(w: &Waveform, cfg: &MelConfig) -> Result<MelSpectrogram> {
    MelAnalyzer::new(cfg)?.analyze(w)
}

/// Seeded uniform permutation (ChaCha8 + Fisher–Yates) of frame indices.
pub fn shuffle_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Reorders frames by a seeded permutation; the multiset of rows is kept.
pub fn shuffle_frames(m: &MelSpectrogram, seed: u64) -> MelSpectrogram {
    let (t, d) = m.frames.dims2();
    let perm = shuffle_permutation(t, seed);
    let mut data = Vec::with_capacity(t * d);
    for &i in &perm {
        data.extend_from_slice(m.frames.row(i));
    }
    MelSpectrogram {
        frames: Tensor::from_parts(vec![t, d], data),
        config: m.config.clone(),
    }
}
