use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SpeakerEmbedder;
use crate::dsp::{shuffle_frames, MelAnalyzer, Waveform};
use crate::error::{invalid, Result};
use crate::numerics::{ParamStore, Tensor};

/// Range of reference segment durations, drawn uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentSpec {
    pub min_secs: f64,
    pub max_secs: f64,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        Self {
            min_secs: 2.0,
            max_secs: 4.0,
        }
    }
}

/// Shuffled reference mel frames, each followed by the speaker embedding:
/// `[T_r, n_mels + D_spk]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimbreSequence {
    pub frames: Tensor,
    pub n_mels: usize,
}

impl TimbreSequence {
    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    /// Reorders rows; the timbre modules must not notice.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| self.frames.row(i).to_vec()).collect();
        Self {
            frames: Tensor::from_rows(&rows).expect("rows of equal width"),
            n_mels: self.n_mels,
        }
    }
}

/// A contiguous slice of the reference whose length is uniform in the
/// requested range (capped by the reference itself) at a uniform offset.
pub fn reference_segment(r: &Waveform, spec: SegmentSpec, seed: u64) -> Result<Waveform> {
    if !(spec.min_secs > 0.0 && spec.min_secs <= spec.max_secs) {
        return Err(invalid(format!(
            "segment range [{}, {}] s is empty",
            spec.min_secs, spec.max_secs
        )));
    }
    let sr = r.sample_rate() as f64;
    let min_len = (spec.min_secs * sr).round() as usize;
    if r.len() < min_len {
        return Err(invalid(format!(
            "reference of {:.3} s is shorter than the {:.3} s minimum segment",
            r.duration_secs(),
            spec.min_secs
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let secs = if spec.max_secs > spec.min_secs {
        rng.random_range(spec.min_secs..spec.max_secs)
    } else {
        spec.min_secs
    };
    let len = ((secs * sr).round() as usize).clamp(min_len, r.len());
    let start = rng.random_range(0..=r.len() - len);
    r.slice(start, len)
}

/// Reference waveform → random segment → log-mel → frame shuffle → per-row
/// concatenation of the segment's speaker embedding.
pub fn build_reference_timbre(
    r: &Waveform,
    seed: u64,
    spec: SegmentSpec,
    analyzer: &MelAnalyzer,
    embedder: &SpeakerEmbedder,
    store: &ParamStore,
) -> Result<TimbreSequence> {
    let seg = reference_segment(r, spec, seed)?;
    let mel = analyzer.analyze(&seg)?;
    let emb = embedder.embed_frames(store, &mel.frames)?;
    let shuffled = shuffle_frames(&mel, seed.wrapping_add(0x5eed));
    let rows: Vec<Vec<f64>> = (0..shuffled.n_frames())
        .map(|i| shuffled.frames.row(i).iter().chain(&emb).copied().collect())
        .collect();
    Ok(TimbreSequence {
        frames: Tensor::from_rows(&rows)?,
        n_mels: mel.n_mels(),
    })
}
