//! Content path: frozen posteriorgram and SSL stand-ins, residual vector
//! quantisation of the SSL track, and the adaptive fusion that gates the
//! posteriorgram with learned coefficients.

mod fusion;
mod ppg;
mod rvq;
mod ssl;

pub use fusion::{modulate, AdaptiveFusion, LEAKY_SLOPE};
pub use ppg::{frame_labels, ppg_provider, FeatureSequence, Segment};
pub use rvq::{commit_loss, rvq_commit_loss, Codebook, QuantizedSequence, Rvq, LAPLACE_EPS};
pub use ssl::SslProvider;

use crate::error::Result;
use crate::numerics::{Graph, Tensor, Var};

/// The content encoder's learned and frozen parts; the codebooks live in
/// [`Rvq`] because they are updated outside the gradient step.
#[derive(Clone, Debug)]
pub struct ContentEncoder {
    pub ssl: SslProvider,
    pub fusion: AdaptiveFusion,
}

pub struct ContentOutput {
    /// `[D_p, T_p]`.
    pub content: Var,
    /// Commitment term for this sequence.
    pub commit: Var,
    pub quantized: QuantizedSequence,
}

impl ContentEncoder {
    /// `mel: [n_mels, T]` (already normalised), `ppg: [T_p, S]` time-major.
    pub fn forward(&self, g: &mut Graph, rvq: &Rvq, mel: Var, ppg: &Tensor) -> Result<ContentOutput> {
        let ssl = self.ssl.forward(g, mel)?;
        let quantized = rvq.quantize(&g.value(ssl).transpose())?;
        let commit = commit_loss(g, ssl, &quantized)?;
        let st = g.straight_through(ssl, quantized.vectors.transpose())?;
        let p = g.constant(ppg.transpose());
        let content = self.fusion.forward(g, st, p)?;
        Ok(ContentOutput {
            content,
            commit,
            quantized,
        })
    }
}
