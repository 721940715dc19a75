use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::FeatureSequence;
use crate::error::Result;
use crate::numerics::nn::Conv1d;
use crate::numerics::{Graph, Init, ParamStore, Tensor, Var};

/// Frozen self-supervised feature stand-in: two seeded convolutions over
/// the mel spectrogram, the first with stride 2, so `T_ssl = ceil(T / 2)`.
#[derive(Clone, Debug)]
pub struct SslProvider {
    conv1: Conv1d,
    conv2: Conv1d,
    pub dim: usize,
}

impl SslProvider {
    /// Registers frozen weights under `ssl.` drawn from their own `seed`.
    pub fn new(store: &mut ParamStore, seed: u64, n_mels: usize, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = Init::new(store, &mut rng).frozen();
        let mut s = init.scope("ssl");
        Self {
            conv1: Conv1d::new(&mut s, "conv1", n_mels, dim, 3, 2, 1),
            conv2: Conv1d::same3(&mut s, "conv2", dim, dim),
            dim,
        }
    }

    /// `[n_mels, T]` → `[dim, ceil(T/2)]`.
    pub fn forward(&self, g: &mut Graph, mel: Var) -> Result<Var> {
        let h = self.conv1.forward(g, mel)?;
        let h = g.silu(h)?;
        self.conv2.forward(g, h)
    }

    /// Features of time-major mel frames `[T, n_mels]`.
    pub fn provide(&self, store: &ParamStore, frames: &Tensor, mel_rate: f64) -> Result<FeatureSequence> {
        let mut g = Graph::new(store);
        let x = g.constant(frames.transpose());
        let y = self.forward(&mut g, x)?;
        Ok(FeatureSequence {
            frames: g.value(y).transpose(),
            frame_rate: mel_rate / 2.0,
        })
    }
}
