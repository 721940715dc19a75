use crate::error::Result;
use crate::numerics::nn::{Conv1d, GroupNorm, Linear, MultiHeadAttention};
use crate::numerics::{Graph, Init, Tensor, Var};

/// `h + Conv1d(MHSA(GroupNorm(h)))` with pointwise convolution.
#[derive(Clone, Debug)]
pub struct SelfAttentionBlock {
    pub norm: GroupNorm,
    pub attn: MultiHeadAttention,
    pub proj: Conv1d,
}

impl SelfAttentionBlock {
    pub fn new(init: &mut Init, name: &str, dim: usize, heads: usize, groups: usize) -> Self {
        let mut s = init.scope(name);
        Self {
            norm: GroupNorm::new(&mut s, "norm", dim, groups, true),
            attn: MultiHeadAttention::new(&mut s, "attn", dim, heads),
            proj: Conv1d::pointwise(&mut s, "proj", dim, dim),
        }
    }

    pub fn forward(&self, g: &mut Graph, h: Var) -> Result<(Var, Vec<Var>)> {
        let n = self.norm.forward(g, h)?;
        let (a, w) = self.attn.forward(g, n, n)?;
        let p = self.proj.forward(g, a)?;
        Ok((g.add(h, p)?, w))
    }
}

/// Per-channel scale and shift, `[C, 1]` each.
#[derive(Clone, Debug, PartialEq)]
pub struct TimbreCondition {
    pub gamma: Tensor,
    pub beta: Tensor,
}

impl TimbreCondition {
    /// `γ ⊙ h + β` on time-major rows `h: [T, C]`.
    pub fn apply(&self, h: &Tensor) -> Result<Tensor> {
        let out = film_apply_rows(h, self.gamma.data(), self.beta.data())?;
        Ok(out)
    }
}

fn film_apply_rows(h: &Tensor, gamma: &[f64], beta: &[f64]) -> Result<Tensor> {
    let (t, c) = h.dims2();
    if gamma.len() != c || beta.len() != c {
        return Err(crate::error::shape_err(format!(
            "FiLM of width {} on {c}-channel frames",
            gamma.len()
        )));
    }
    let mut data = Vec::with_capacity(t * c);
    for i in 0..t {
        data.extend(h.row(i).iter().zip(gamma).zip(beta).map(|((x, g), b)| g * x + b));
    }
    Tensor::matrix(t, c, data)
}

/// FiLM on channel-major `h: [C, T]` with `gamma, beta: [C, 1]`.
pub fn film_apply(g: &mut Graph, h: Var, gamma: Var, beta: Var) -> Result<Var> {
    let y = g.mul_col(h, gamma)?;
    g.add_col(y, beta)
}

/// Shuffled timbre frames → pointwise projection → self-attention blocks →
/// time average → FiLM head producing `(γ, β)`.
#[derive(Clone, Debug)]
pub struct MemoryAugment {
    pub input: Conv1d,
    pub blocks: Vec<SelfAttentionBlock>,
    pub gamma: Linear,
    pub beta: Linear,
}

impl MemoryAugment {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        init: &mut Init,
        in_dim: usize,
        dim: usize,
        heads: usize,
        groups: usize,
        n_blocks: usize,
        cond_dim: usize,
    ) -> Self {
        let mut s = init.scope("memory");
        let input = Conv1d::pointwise(&mut s, "input", in_dim, dim);
        let blocks = (0..n_blocks)
            .map(|i| SelfAttentionBlock::new(&mut s, &format!("sa{i}"), dim, heads, groups))
            .collect();
        // start near the identity modulation
        let std = 0.1 / (dim as f64).sqrt();
        Self {
            input,
            blocks,
            gamma: Linear::with_std(&mut s, "film_gamma", dim, cond_dim, std, 1.0),
            beta: Linear::with_std(&mut s, "film_beta", dim, cond_dim, std, 0.0),
        }
    }

    /// `x: [in_dim, T_r]` → `(γ, β)` as `[cond_dim, 1]` vars, plus every
    /// head's attention weights.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<(Var, Var, Vec<Var>)> {
        let mut h = self.input.forward(g, x)?;
        let mut weights = Vec::new();
        for b in &self.blocks {
            let (y, w) = b.forward(g, h)?;
            h = y;
            weights.extend(w);
        }
        let pooled = g.mean_axis(h, 1)?;
        let gamma = self.gamma.forward(g, pooled)?;
        let beta = self.beta.forward(g, pooled)?;
        Ok((gamma, beta, weights))
    }
}
