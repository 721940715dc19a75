use super::Waveform;
use crate::error::{invalid, Result};

const FRAME_SECS: f64 = 0.040;
const HOP_SECS: f64 = 0.010;
const VOICING_THRESHOLD: f64 = 0.3;

/// Per-frame autocorrelation pitch (40 ms frames, 10 ms hop) and the median
/// over voiced frames. A frame is voiced when its best lag peak reaches 0.3
/// of the lag-0 energy; returns 0 when no frame is voiced.
pub fn estimate_f0(w: &Waveform, f_lo: f64, f_hi: f64) -> Result<f64> {
    let track = f0_track(w, f_lo, f_hi)?;
    let mut voiced: Vec<f64> = track.into_iter().flatten().collect();
    if voiced.is_empty() {
        return Ok(0.0);
    }
    voiced.sort_by(f64::total_cmp);
    let n = voiced.len();
    Ok(if n % 2 == 1 {
        voiced[n / 2]
    } else {
        0.5 * (voiced[n / 2 - 1] + voiced[n / 2])
    })
}

/// Frame-level estimates; `None` marks unvoiced frames.
pub fn f0_track(w: &Waveform, f_lo: f64, f_hi: f64) -> Result<Vec<Option<f64>>> {
    let sr = w.sample_rate() as f64;
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi < sr / 2.0) {
        return Err(invalid(format!("need 0 < f_lo {f_lo} < f_hi {f_hi} < {}", sr / 2.0)));
    }
    let frame = (FRAME_SECS * sr).round() as usize;
    let hop = (HOP_SECS * sr).round() as usize;
    let min_lag = (sr / f_hi).floor().max(1.0) as usize;
    let max_lag = ((sr / f_lo).ceil() as usize).min(frame - 2);
    let x = w.samples();
    if x.len() < frame || min_lag + 1 >= max_lag {
        return Ok(Vec::new());
    }
    let n_frames = 1 + (x.len() - frame) / hop;
    Ok((0..n_frames)
        .map(|i| {
            let seg = &x[i * hop..i * hop + frame];
            let mean = seg.iter().sum::<f64>() / frame as f64;
            let s: Vec<f64> = seg.iter().map(|v| v - mean).collect();
            frame_pitch(&s, min_lag, max_lag, sr)
        })
        .collect())
}

fn frame_pitch(s: &[f64], min_lag: usize, max_lag: usize, sr: f64) -> Option<f64> {
    // biased autocorrelation: the shrinking overlap favours the true period
    // over its multiples
    let r = |lag: usize| -> f64 { s.iter().zip(&s[lag..]).map(|(a, b)| a * b).sum() };
    let r0 = r(0);
    if r0 <= 1e-12 {
        return None;
    }
    let ac: Vec<f64> = (min_lag - 1..=max_lag + 1).map(r).collect();
    let mut best: Option<(usize, f64)> = None;
    for j in 1..ac.len() - 1 {
        if ac[j] >= ac[j - 1] && ac[j] >= ac[j + 1] && best.is_none_or(|(_, v)| ac[j] > v) {
            best = Some((j, ac[j]));
        }
    }
    let (j, peak) = best?;
    if peak < VOICING_THRESHOLD * r0 {
        return None;
    }
    let (a, b, c) = (ac[j - 1], ac[j], ac[j + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 1e-15 { 0.5 * (a - c) / denom } else { 0.0 };
    let lag = (min_lag - 1 + j) as f64 + offset.clamp(-0.5, 0.5);
    Some(sr / lag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone(f: f64, sr: u32, secs: f64, saw: bool) -> Waveform {
        let n = (secs * sr as f64) as usize;
        let s = (0..n)
            .map(|i| {
                let ph = (f * i as f64 / sr as f64).fract();
                if saw {
                    0.5 * (2.0 * ph - 1.0)
                } else {
                    0.5 * (std::f64::consts::TAU * ph).sin()
                }
            })
            .collect();
        Waveform::new(s, sr).unwrap()
    }

    #[test]
    fn sawtooth_220() {
        let f0 = estimate_f0(&tone(220.0, 16000, 1.0, true), 60.0, 500.0).unwrap();
        assert!((f0 / 220.0 - 1.0).abs() < 0.03, "{f0}");
    }

    #[test]
    fn white_noise_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = (0..16000).map(|_| rng.random_range(-0.5..0.5)).collect();
        let f0 = estimate_f0(&Waveform::new(s, 16000).unwrap(), 60.0, 500.0).unwrap();
        assert_eq!(f0, 0.0);
    }

    #[test]
    fn ordering_of_sines() {
        let lo = estimate_f0(&tone(110.0, 16000, 1.0, false), 60.0, 500.0).unwrap();
        let hi = estimate_f0(&tone(330.0, 16000, 1.0, false), 60.0, 500.0).unwrap();
        assert!(lo > 0.0 && lo < hi, "{lo} {hi}");
    }

    #[test]
    fn bad_band_rejected() {
        let w = tone(100.0, 16000, 0.2, false);
        assert!(estimate_f0(&w, 300.0, 100.0).is_err());
        assert!(estimate_f0(&w, 50.0, 9000.0).is_err());
    }
}
