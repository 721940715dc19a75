use crate::error::Result;
use crate::numerics::nn::{interpolate_time, LayerNorm, Linear, MultiHeadAttention};
use crate::numerics::{Graph, Init, Var};

/// Cross-attention, residual + layer norm, then a position-wise feed-forward
/// network with residual + layer norm.
#[derive(Clone, Debug)]
pub struct CrossAttentionBlock {
    pub attn: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub norm2: LayerNorm,
}

impl CrossAttentionBlock {
    pub fn new(init: &mut Init, name: &str, dim: usize, heads: usize, ff_dim: usize) -> Self {
        let mut s = init.scope(name);
        Self {
            attn: MultiHeadAttention::new(&mut s, "attn", dim, heads),
            norm1: LayerNorm::new(&mut s, "norm1", dim),
            ff1: Linear::new(&mut s, "ff1", dim, ff_dim),
            ff2: Linear::new(&mut s, "ff2", ff_dim, dim),
            norm2: LayerNorm::new(&mut s, "norm2", dim),
        }
    }

    /// `query: [dim, T_q]`, `kv: [dim, T_k]` → `[dim, T_q]` and the
    /// per-head `[T_q, T_k]` weights.
    pub fn forward(&self, g: &mut Graph, query: Var, kv: Var) -> Result<(Var, Vec<Var>)> {
        let (a, w) = self.attn.forward(g, query, kv)?;
        let h = g.add(query, a)?;
        let h = self.norm1.forward(g, h)?;
        let f = self.ff1.forward(g, h)?;
        let f = g.silu(f)?;
        let f = self.ff2.forward(g, f)?;
        let h2 = g.add(h, f)?;
        Ok((self.norm2.forward(g, h2)?, w))
    }
}

pub fn cross_attention(
    g: &mut Graph,
    query: Var,
    kv: Var,
    block: &CrossAttentionBlock,
) -> Result<(Var, Vec<Var>)> {
    block.forward(g, query, kv)
}

/// Content frames query the timbre frames through stacked cross-attention
/// blocks; the result is stretched to the mel frame count.
#[derive(Clone, Debug)]
pub struct ContextAwareFusion {
    pub content_proj: Linear,
    pub timbre_proj: Linear,
    pub blocks: Vec<CrossAttentionBlock>,
    pub dim: usize,
}

impl ContextAwareFusion {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        init: &mut Init,
        content_dim: usize,
        timbre_dim: usize,
        dim: usize,
        heads: usize,
        n_blocks: usize,
        ff_dim: usize,
    ) -> Self {
        let mut s = init.scope("context");
        Self {
            content_proj: Linear::new(&mut s, "content_proj", content_dim, dim),
            timbre_proj: Linear::new(&mut s, "timbre_proj", timbre_dim, dim),
            blocks: (0..n_blocks)
                .map(|i| CrossAttentionBlock::new(&mut s, &format!("ca{i}"), dim, heads, ff_dim))
                .collect(),
            dim,
        }
    }

    /// `content: [D_p, T_p]`, `timbre: [D_t, T_r]` → `[dim, t_mel]` plus
    /// attention weights.
    pub fn forward(&self, g: &mut Graph, content: Var, timbre: Var, t_mel: usize) -> Result<(Var, Vec<Var>)> {
        let mut h = self.content_proj.forward(g, content)?;
        let kv = self.timbre_proj.forward(g, timbre)?;
        let mut weights = Vec::new();
        for b in &self.blocks {
            let (y, w) = b.forward(g, h, kv)?;
            h = y;
            weights.extend(w);
        }
        Ok((interpolate_time(g, h, t_mel)?, weights))
    }
}
