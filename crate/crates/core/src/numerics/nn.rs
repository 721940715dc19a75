//! Layers over channel-major sequences `[channels, time]`.

use super::linalg::interp_matrix;
use super::{Graph, Init, ParamId, Tensor, Var};
use crate::error::{shape_err, Result};

pub const NORM_EPS: f64 = 1e-5;

/// Position-wise affine map `W·x + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(init: &mut Init, name: &str, in_dim: usize, out_dim: usize) -> Self {
        Self::with_std(init, name, in_dim, out_dim, (1.0 / in_dim as f64).sqrt(), 0.0)
    }

    pub fn with_std(
        init: &mut Init,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        std: f64,
        bias: f64,
    ) -> Self {
        let mut s = init.scope(name);
        let w = s.normal("w", &[out_dim, in_dim], std);
        let b = Some(s.constant("b", &[out_dim, 1], bias));
        Self {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn without_bias(init: &mut Init, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let mut s = init.scope(name);
        let w = s.normal("w", &[out_dim, in_dim], (1.0 / in_dim as f64).sqrt());
        Self {
            w,
            b: None,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let w = g.param(self.w);
        let y = g.matmul(w, x)?;
        match self.b {
            Some(b) => {
                let b = g.param(b);
                g.add_col(y, b)
            }
            None => Ok(y),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1d {
    pub fn new(
        init: &mut Init,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        let std = (1.0 / (c_in * kernel) as f64).sqrt();
        let mut s = init.scope(name);
        let w = s.normal("w", &[c_out, c_in, kernel], std);
        let b = s.constant("b", &[c_out, 1], 0.0);
        Self {
            w,
            b,
            stride,
            padding,
        }
    }

    /// Kernel 3, stride 1, padding 1: length preserving.
    pub fn same3(init: &mut Init, name: &str, c_in: usize, c_out: usize) -> Self {
        Self::new(init, name, c_in, c_out, 3, 1, 1)
    }

    pub fn pointwise(init: &mut Init, name: &str, c_in: usize, c_out: usize) -> Self {
        Self::new(init, name, c_in, c_out, 1, 1, 0)
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let y = g.conv1d(x, w, self.stride, self.padding)?;
        g.add_col(y, b)
    }
}

/// Group normalisation over `[C, T]`: statistics per channel group across
/// all time steps, so it is indifferent to the order of frames.
#[derive(Clone, Debug)]
pub struct GroupNorm {
    pub groups: usize,
    pub affine: Option<(ParamId, ParamId)>,
}

impl GroupNorm {
    pub fn new(init: &mut Init, name: &str, channels: usize, groups: usize, affine: bool) -> Self {
        assert!(groups > 0 && channels % groups == 0, "{channels} channels into {groups} groups");
        let affine = affine.then(|| {
            let mut s = init.scope(name);
            (
                s.constant("gamma", &[channels, 1], 1.0),
                s.constant("beta", &[channels, 1], 0.0),
            )
        });
        Self { groups, affine }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let y = g.normalize_chunks(x, self.groups, NORM_EPS)?;
        match self.affine {
            Some((ga, be)) => {
                let ga = g.param(ga);
                let be = g.param(be);
                let y = g.mul_col(y, ga)?;
                g.add_col(y, be)
            }
            None => Ok(y),
        }
    }
}

/// Layer normalisation over channels at each time step.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(init: &mut Init, name: &str, channels: usize) -> Self {
        let mut s = init.scope(name);
        Self {
            gamma: s.constant("gamma", &[channels, 1], 1.0),
            beta: s.constant("beta", &[channels, 1], 0.0),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let t = g.value(x).cols();
        let xt = g.transpose(x)?;
        let n = g.normalize_chunks(xt, t, NORM_EPS)?;
        let y = g.transpose(n)?;
        let ga = g.param(self.gamma);
        let be = g.param(self.beta);
        let y = g.mul_col(y, ga)?;
        g.add_col(y, be)
    }
}

/// Scaled dot-product attention with `heads` heads over channel-major inputs.
/// No positional information enters, so outputs are equivariant to query
/// order and invariant to key/value order.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new(init: &mut Init, name: &str, dim: usize, heads: usize) -> Self {
        assert!(heads > 0 && dim % heads == 0, "model dim {dim} not divisible by {heads} heads");
        let mut s = init.scope(name);
        Self {
            q: Linear::new(&mut s, "q", dim, dim),
            k: Linear::without_bias(&mut s, "k", dim, dim),
            v: Linear::new(&mut s, "v", dim, dim),
            o: Linear::new(&mut s, "o", dim, dim),
            heads,
            dim,
        }
    }

    /// Returns the `[dim, T_q]` output and each head's `[T_q, T_k]`
    /// attention weights.
    pub fn forward(&self, g: &mut Graph, query: Var, kv: Var) -> Result<(Var, Vec<Var>)> {
        if g.value(kv).cols() == 0 {
            return Err(shape_err("attention over an empty key sequence"));
        }
        let q = self.q.forward(g, query)?;
        let k = self.k.forward(g, kv)?;
        let v = self.v.forward(g, kv)?;
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_rows(q, h * dh, dh)?;
            let kh = g.slice_rows(k, h * dh, dh)?;
            let vh = g.slice_rows(v, h * dh, dh)?;
            let qt = g.transpose(qh)?;
            let scores = g.matmul(qt, kh)?;
            let scores = g.scale(scores, scale)?;
            let a = g.softmax(scores, 1)?;
            let at = g.transpose(a)?;
            outs.push(g.matmul(vh, at)?);
            weights.push(a);
        }
        let cat = g.concat_rows(&outs)?;
        Ok((self.o.forward(g, cat)?, weights))
    }
}

/// Linear resampling of `x: [C, T_in]` along time to `t_out` columns, end
/// points aligned.
pub fn interpolate_time(g: &mut Graph, x: Var, t_out: usize) -> Result<Var> {
    let t_in = g.value(x).cols();
    if t_out == 0 {
        return Err(shape_err("interpolation to zero frames"));
    }
    if t_in == t_out {
        return Ok(x);
    }
    let m = g.constant(Tensor::from_parts(vec![t_in, t_out], interp_matrix(t_in, t_out)));
    g.matmul(x, m)
}

/// Fixed sinusoidal features of a scalar time `t ∈ [0, 1]`, `[dim, 1]`.
pub fn sinusoidal_embedding(t: f64, dim: usize) -> Tensor {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10_000f64).ln() * i as f64 / half.max(1) as f64).exp();
        // scale t so that the lowest frequencies still vary over [0, 1]
        let arg = 1000.0 * t * freq;
        out[i] = arg.sin();
        out[half + i] = arg.cos();
    }
    Tensor::from_parts(vec![dim, 1], out)
}
