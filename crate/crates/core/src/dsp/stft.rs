use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::par;

/// Frame-synchronous STFT without centre padding: frame `i` analyses samples
/// `[i·hop, i·hop + win)` under a periodic Hann window, zero-padded to `n_fft`.
pub struct Stft {
    pub n_fft: usize,
    pub hop: usize,
    pub win: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(n_fft: usize, hop: usize, win: usize) -> Self {
        let mut planner = FftPlanner::new();
        let window = (0..win)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / win as f64).cos())
            .collect();
        Self {
            n_fft,
            hop,
            win,
            window,
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.win {
            0
        } else {
            1 + (len - self.win) / self.hop
        }
    }

    /// Signal length spanned by `frames` frames.
    pub fn signal_len(&self, frames: usize) -> usize {
        (frames - 1) * self.hop + self.win
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// One-sided spectra, `frames × n_bins`.
    pub fn analyze(&self, x: &[f64]) -> Vec<Vec<Complex<f64>>> {
        let frames = self.n_frames(x.len());
        par::map_range(frames, |i| {
            let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
            let seg = &x[i * self.hop..i * self.hop + self.win];
            for ((b, s), w) in buf.iter_mut().zip(seg).zip(&self.window) {
                b.re = s * w;
            }
            self.forward.process(&mut buf);
            buf.truncate(self.n_bins());
            buf
        })
    }

    /// Least-squares inverse: the real signal whose STFT is closest to the
    /// given one-sided spectra, by weighted overlap-add.
    pub fn synthesize(&self, spectra: &[Vec<Complex<f64>>]) -> Vec<f64> {
        self.synthesize_floored(spectra, 0.0)
    }

    /// [`Stft::synthesize`] with the overlap-add normaliser clamped below at
    /// `floor` times its peak, which tames the signal ends where only the
    /// window tails reach.
    pub fn synthesize_floored(&self, spectra: &[Vec<Complex<f64>>], floor: f64) -> Vec<f64> {
        let frames = spectra.len();
        if frames == 0 {
            return Vec::new();
        }
        let len = self.signal_len(frames);
        let n = self.n_fft;
        let time: Vec<Vec<f64>> = par::map_slice(spectra, |half| {
            let mut buf = vec![Complex::new(0.0, 0.0); n];
            buf[..half.len()].copy_from_slice(half);
            buf[0].im = 0.0;
            if n % 2 == 0 {
                buf[n / 2].im = 0.0;
            }
            for k in 1..(n + 1) / 2 {
                buf[n - k] = buf[k].conj();
            }
            self.inverse.process(&mut buf);
            buf[..self.win].iter().map(|c| c.re / n as f64).collect()
        });
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        for (i, y) in time.iter().enumerate() {
            let off = i * self.hop;
            for (k, (&yk, &w)) in y.iter().zip(&self.window).enumerate() {
                out[off + k] += w * yk;
                norm[off + k] += w * w;
            }
        }
        let min_norm = floor * norm.iter().fold(0.0f64, |a, &b| a.max(b));
        for (o, nm) in out.iter_mut().zip(&norm) {
            let nm = nm.max(min_norm);
            *o = if nm > 1e-12 { *o / nm } else { 0.0 };
        }
        out
    }
}

/// Weight of bin `k` in a one-sided spectrum so that sums over bins equal the
/// full two-sided sums (interior bins appear twice).
pub fn bin_weight(k: usize, n_fft: usize) -> f64 {
    if k == 0 || (n_fft % 2 == 0 && k == n_fft / 2) {
        1.0
    } else {
        2.0
    }
}
