use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::{MelAnalyzer, MelConfig, Waveform};
use crate::error::{shape_err, Result};
use crate::numerics::{Init, ParamId, ParamStore, Tensor};

/// Frozen speaker-embedding stand-in: per-band log-mel mean (with the
/// overall level removed) and standard deviation, projected by a seeded
/// random matrix and scaled to unit length.
#[derive(Clone, Debug)]
pub struct SpeakerEmbedder {
    proj: ParamId,
    pub n_mels: usize,
    pub dim: usize,
}

impl SpeakerEmbedder {
    pub fn new(store: &mut ParamStore, seed: u64, n_mels: usize, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = Init::new(store, &mut rng).frozen();
        let proj = init
            .scope("spk")
            .normal("proj", &[dim, 2 * n_mels], (1.0 / (2 * n_mels) as f64).sqrt());
        Self { proj, n_mels, dim }
    }

    /// Embedding of time-major log-mel frames `[T, n_mels]`.
    pub fn embed_frames(&self, store: &ParamStore, frames: &Tensor) -> Result<Vec<f64>> {
        let (t, m) = frames.dims2();
        if m != self.n_mels {
            return Err(shape_err(format!("embedder for {} bands given {m}", self.n_mels)));
        }
        let mut mean = vec![0.0; m];
        for i in 0..t {
            mean.iter_mut().zip(frames.row(i)).for_each(|(a, v)| *a += v);
        }
        mean.iter_mut().for_each(|a| *a /= t as f64);
        let mut std = vec![0.0; m];
        for i in 0..t {
            std.iter_mut()
                .zip(frames.row(i))
                .zip(&mean)
                .for_each(|((s, v), mu)| *s += (v - mu) * (v - mu));
        }
        std.iter_mut().for_each(|s| *s = (*s / t as f64).sqrt());
        let level = mean.iter().sum::<f64>() / m as f64;
        let stats: Vec<f64> = mean.iter().map(|v| v - level).chain(std).collect();

        let p = store.value(self.proj);
        let mut out: Vec<f64> = (0..self.dim)
            .map(|r| p.row(r).iter().zip(&stats).map(|(a, b)| a * b).sum())
            .collect();
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        } else {
            // constant input: fall back to a fixed unit vector
            out[0] = 1.0;
        }
        Ok(out)
    }

    pub fn embed(&self, store: &ParamStore, analyzer: &MelAnalyzer, w: &Waveform) -> Result<Vec<f64>> {
        let mel = analyzer.analyze(w)?;
        self.embed_frames(store, &mel.frames)
    }
}

/// One-off embedding with a freshly seeded projection.
pub fn speaker_embed(w: &Waveform, cfg: &MelConfig, seed: u64, dim: usize) -> Result<Vec<f64>> {
    let mut store = ParamStore::new();
    let e = SpeakerEmbedder::new(&mut store, seed, cfg.n_mels, dim);
    e.embed(&store, &MelAnalyzer::new(cfg)?, w)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}
