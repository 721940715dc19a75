//! Mel inversion: non-negative least squares back to linear magnitudes,
//! then Griffin–Lim phase retrieval.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use super::mel::{MelAnalyzer, MelFilterbank, MelSpectrogram};
use super::stft::bin_weight;
use super::Waveform;
use crate::error::{invalid, Result};
use crate::par;

const NNLS_ITERS: usize = 200;
const PHASE_SEED: u64 = 0x6772_6966;
const OUTPUT_NORM_FLOOR: f64 = 0.1;

/// Multiplicative-update NNLS for `min ‖F s − e‖²` subject to `s ≥ 0`,
/// started from the filter-weighted average band magnitude.
pub fn nnls_frame(fb: &MelFilterbank, energies: &[f64], iters: usize) -> Vec<f64> {
    let n_bins = fb.n_bins;
    let ones = vec![1.0; n_bins];
    let mut row_sum = vec![0.0; fb.n_mels()];
    fb.apply(&ones, &mut row_sum);
    let avg: Vec<f64> = energies
        .iter()
        .zip(&row_sum)
        .map(|(e, r)| if *r > 0.0 { e / r } else { 0.0 })
        .collect();
    let mut col_sum = vec![0.0; n_bins];
    fb.apply_transpose(&vec![1.0; fb.n_mels()], &mut col_sum);
    let mut s = vec![0.0; n_bins];
    fb.apply_transpose(&avg, &mut s);
    for (v, c) in s.iter_mut().zip(&col_sum) {
        *v = if *c > 0.0 { *v / c } else { 0.0 };
    }

    let mut fte = vec![0.0; n_bins];
    fb.apply_transpose(energies, &mut fte);
    let mut fs = vec![0.0; fb.n_mels()];
    let mut ftfs = vec![0.0; n_bins];
    for _ in 0..iters {
        fb.apply(&s, &mut fs);
        fb.apply_transpose(&fs, &mut ftfs);
        for ((v, num), den) in s.iter_mut().zip(&fte).zip(&ftfs) {
            if *den > 0.0 {
                *v *= num / den;
            }
        }
    }
    s
}

/// Linear magnitude spectrogram `frames × n_bins` recovered from a log-mel.
pub fn mel_to_linear(analyzer: &MelAnalyzer, mel: &MelSpectrogram) -> Vec<Vec<f64>> {
    let n_mels = mel.n_mels();
    par::map_range(mel.n_frames(), |i| {
        let e: Vec<f64> = mel.frames.row(i).iter().map(|v| v.exp()).collect();
        debug_assert_eq!(e.len(), n_mels);
        nnls_frame(&analyzer.filterbank, &e, NNLS_ITERS)
    })
}

pub struct GriffinLimOutput {
    pub waveform: Waveform,
    /// `‖|STFT(x_k)| − S‖ / ‖S‖` after each iteration (two-sided weighting).
    pub convergence: Vec<f64>,
}

/// Griffin–Lim from a log-mel spectrogram. Phases start from a fixed seed,
/// so the result is deterministic.
pub fn griffin_lim(mel: &MelSpectrogram, n_iters: usize) -> Result<Waveform> {
    Ok(griffin_lim_traced(mel, n_iters)?.waveform)
}

pub fn griffin_lim_traced(mel: &MelSpectrogram, n_iters: usize) -> Result<GriffinLimOutput> {
    if n_iters == 0 {
        return Err(invalid("griffin_lim needs at least one iteration"));
    }
    let analyzer = MelAnalyzer::new(&mel.config)?;
    let target = mel_to_linear(&analyzer, mel);
    let stft = &analyzer.stft;
    let n_fft = stft.n_fft;
    let target_norm = weighted_norm(&target, n_fft);

    let mut rng = ChaCha8Rng::seed_from_u64(PHASE_SEED);
    let mut phases: Vec<Vec<Complex<f64>>> = target
        .iter()
        .map(|row| {
            row.iter()
                .map(|_| Complex::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
                .collect()
        })
        .collect();

    let combine = |phases: &[Vec<Complex<f64>>]| -> Vec<Vec<Complex<f64>>> {
        target
            .iter()
            .zip(phases)
            .map(|(mag, ph)| mag.iter().zip(ph).map(|(m, p)| p * *m).collect())
            .collect()
    };
    let mut convergence = Vec::with_capacity(n_iters);
    for _ in 0..n_iters {
        let signal = stft.synthesize(&combine(&phases));
        let re = stft.analyze(&signal);
        let mut err = 0.0;
        for ((row, mag), ph) in re.iter().zip(&target).zip(phases.iter_mut()) {
            for (k, ((c, m), p)) in row.iter().zip(mag).zip(ph.iter_mut()).enumerate() {
                let a = c.norm();
                err += bin_weight(k, n_fft) * (a - m) * (a - m);
                if a > 0.0 {
                    *p = c / a;
                }
            }
        }
        convergence.push(if target_norm > 0.0 {
            err.sqrt() / target_norm
        } else {
            err.sqrt()
        });
    }
    let signal = stft.synthesize_floored(&combine(&phases), OUTPUT_NORM_FLOOR);
    Ok(GriffinLimOutput {
        waveform: Waveform::from_clamped(signal, mel.config.sample_rate)?,
        convergence,
    })
}

fn weighted_norm(rows: &[Vec<f64>], n_fft: usize) -> f64 {
    rows.iter()
        .flat_map(|r| r.iter().enumerate().map(|(k, v)| bin_weight(k, n_fft) * v * v))
        .sum::<f64>()
        .sqrt()
}
