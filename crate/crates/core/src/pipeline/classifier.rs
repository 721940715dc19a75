//! Oracle symbol classifier used to score content preservation: nearest
//! centroid on speaker-normalised, band-smoothed log-mel frames.

use crate::content::Segment;
use crate::error::{invalid, Result};
use crate::numerics::Tensor;

/// Frames within this many samples of a symbol boundary are transitional.
pub const BOUNDARY_MARGIN: usize = 240;
const SMOOTH: [f64; 5] = [1.0, 2.0, 3.0, 2.0, 1.0];

/// Label of each mel frame whose window lies inside one symbol, away from
/// the crossfades at its boundaries; `None` for transitional frames.
pub fn interior_labels(segs: &[Segment], n_frames: usize, hop: usize, win: usize) -> Vec<Option<usize>> {
    let last = segs.last().map_or(0, |s| s.end);
    (0..n_frames)
        .map(|i| {
            let (a, b) = (i * hop, i * hop + win);
            segs.iter().find_map(|s| {
                let lo = if s.start == 0 { 0 } else { s.start + BOUNDARY_MARGIN };
                let hi = if s.end == last { s.end } else { s.end.saturating_sub(BOUNDARY_MARGIN) };
                (a >= lo && b <= hi).then_some(s.symbol)
            })
        })
        .collect()
}

/// Removes each frame's mean level and smooths across bands and frames.
pub fn classifier_features(frames: &Tensor) -> Tensor {
    let (t, m) = frames.dims2();
    let half = SMOOTH.len() / 2;
    let mut out = Vec::with_capacity(t * m);
    for i in 0..t {
        let level = frames.row(i).iter().sum::<f64>() / m as f64;
        let row: Vec<f64> = frames.row(i).iter().map(|v| v - level).collect();
        for b in 0..m {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (k, w) in SMOOTH.iter().enumerate() {
                let j = b as isize + k as isize - half as isize;
                if j >= 0 && (j as usize) < m {
                    acc += w * row[j as usize];
                    wsum += w;
                }
            }
            out.push(acc / wsum);
        }
    }
    // light smoothing over neighbouring frames
    let mut smoothed = vec![0.0; t * m];
    for i in 0..t {
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(t - 1));
        for j in lo..=hi {
            let w = if j == i { 2.0 } else { 1.0 } / (2 + hi - lo) as f64;
            for b in 0..m {
                smoothed[i * m + b] += w * out[j * m + b];
            }
        }
    }
    Tensor::from_parts(vec![t, m], smoothed)
}

/// One centroid per (symbol, voice) pair; a frame takes the symbol of the
/// nearest centroid, so each voice's rendering of a symbol is recognised
/// on its own terms.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolClassifier {
    /// `[S · n_voices, n_mels]`, row `s · n_voices + v`.
    pub centroids: Tensor,
    pub n_voices: usize,
}

impl SymbolClassifier {
    /// Fits centroids from utterances given as (log-mel frames, voice
    /// index, per-frame labels); unlabelled frames are skipped.
    pub fn fit(data: &[(&Tensor, usize, Vec<Option<usize>>)], n_symbols: usize, n_voices: usize) -> Result<Self> {
        let m = data.first().map(|(f, _, _)| f.cols()).ok_or_else(|| invalid("no training data"))?;
        let rows = n_symbols * n_voices;
        let mut sums = vec![0.0; rows * m];
        let mut counts = vec![0usize; rows];
        for (frames, voice, labels) in data {
            if *voice >= n_voices {
                return Err(invalid(format!("voice {voice} out of range for {n_voices}")));
            }
            let feats = classifier_features(frames);
            for (i, l) in labels.iter().enumerate() {
                if let Some(s) = *l {
                    let r = s * n_voices + voice;
                    counts[r] += 1;
                    sums[r * m..(r + 1) * m]
                        .iter_mut()
                        .zip(feats.row(i))
                        .for_each(|(a, v)| *a += v);
                }
            }
        }
        if let Some(r) = counts.iter().position(|&c| c == 0) {
            return Err(invalid(format!(
                "symbol {} has no interior frames for voice {}",
                r / n_voices,
                r % n_voices
            )));
        }
        for (r, &c) in counts.iter().enumerate() {
            sums[r * m..(r + 1) * m].iter_mut().for_each(|v| *v /= c as f64);
        }
        Ok(Self {
            centroids: Tensor::matrix(rows, m, sums)?,
            n_voices,
        })
    }

    pub fn n_symbols(&self) -> usize {
        self.centroids.rows() / self.n_voices
    }

    pub fn classify(&self, frames: &Tensor) -> Vec<usize> {
        let feats = classifier_features(frames);
        (0..feats.rows())
            .map(|i| {
                let f = feats.row(i);
                let best = (0..self.centroids.rows())
                    .map(|r| {
                        let d: f64 = self.centroids.row(r).iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
                        (r, d)
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("at least one centroid");
                best.0 / self.n_voices
            })
            .collect()
    }

    /// Fraction of labelled frames classified correctly, with the count of
    /// labelled frames.
    pub fn accuracy(&self, frames: &Tensor, labels: &[Option<usize>]) -> (f64, usize) {
        let pred = self.classify(frames);
        let (mut hit, mut n) = (0, 0);
        for (p, l) in pred.iter().zip(labels) {
            if let Some(l) = l {
                n += 1;
                hit += usize::from(p == l);
            }
        }
        (if n > 0 { hit as f64 / n as f64 } else { 0.0 }, n)
    }
}
