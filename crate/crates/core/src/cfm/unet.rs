use serde::{Deserialize, Serialize};

use super::{FieldCondition, VectorField};
use crate::error::{shape_err, Result};
use crate::numerics::nn::{interpolate_time, sinusoidal_embedding, Conv1d, GroupNorm, Linear};
use crate::numerics::{Graph, Init, ParamId, Var};
use crate::timbre::film_apply;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UNetConfig {
    /// Channels of the integrated state (mel bands).
    pub state_dim: usize,
    /// Channels of the fused condition sequence.
    pub cond_dim: usize,
    pub hidden: usize,
    pub levels: usize,
    pub blocks_per_level: usize,
    pub groups: usize,
    pub time_dim: usize,
}

/// `x + SiLU(GN₂(conv₂(SiLU(FiLM(GN₁(conv₁ x)) + W·e_t))))`.
#[derive(Clone, Debug)]
pub struct ResBlock {
    conv1: Conv1d,
    norm1: GroupNorm,
    temb: Linear,
    conv2: Conv1d,
    norm2: GroupNorm,
}

impl ResBlock {
    fn new(init: &mut Init, name: &str, c: usize, groups: usize, time_dim: usize) -> Self {
        let mut s = init.scope(name);
        Self {
            conv1: Conv1d::same3(&mut s, "conv1", c, c),
            norm1: GroupNorm::new(&mut s, "norm1", c, groups, false),
            temb: Linear::new(&mut s, "temb", time_dim, c),
            conv2: Conv1d::same3(&mut s, "conv2", c, c),
            norm2: GroupNorm::new(&mut s, "norm2", c, groups, true),
        }
    }

    fn forward(&self, g: &mut Graph, x: Var, temb: Var, gamma: Var, beta: Var) -> Result<Var> {
        let h = self.conv1.forward(g, x)?;
        let h = self.norm1.forward(g, h)?;
        let h = film_apply(g, h, gamma, beta)?;
        let e = self.temb.forward(g, temb)?;
        let h = g.add_col(h, e)?;
        let h = g.silu(h)?;
        let h = self.conv2.forward(g, h)?;
        let h = self.norm2.forward(g, h)?;
        let h = g.silu(h)?;
        g.add(x, h)
    }
}

/// 1-D U-Net over time. The fused condition is concatenated to the state
/// on the channel axis; the FiLM pair modulates every residual block.
#[derive(Clone, Debug)]
pub struct UNet {
    pub config: UNetConfig,
    time1: Linear,
    time2: Linear,
    input: Conv1d,
    down: Vec<Vec<ResBlock>>,
    downsample: Vec<Conv1d>,
    merge: Vec<Conv1d>,
    up: Vec<Vec<ResBlock>>,
    out_norm: GroupNorm,
    output: Conv1d,
    pub null_fused: ParamId,
    pub null_gamma: ParamId,
    pub null_beta: ParamId,
}

impl UNet {
    pub fn new(init: &mut Init, config: &UNetConfig) -> Self {
        let c = config.hidden;
        let (groups, td) = (config.groups, config.time_dim);
        let mut s = init.scope("unet");
        let time1 = Linear::new(&mut s, "time1", td, td);
        let time2 = Linear::new(&mut s, "time2", td, td);
        let input = Conv1d::same3(&mut s, "input", config.state_dim + config.cond_dim, c);
        let blocks = |s: &mut Init, prefix: &str| -> Vec<ResBlock> {
            (0..config.blocks_per_level)
                .map(|b| ResBlock::new(s, &format!("{prefix}.{b}"), c, groups, td))
                .collect()
        };
        let mut down = Vec::new();
        let mut downsample = Vec::new();
        for l in 0..config.levels {
            down.push(blocks(&mut s, &format!("down{l}")));
            if l + 1 < config.levels {
                downsample.push(Conv1d::new(&mut s, &format!("downsample{l}"), c, c, 3, 2, 1));
            }
        }
        let mut merge = Vec::new();
        let mut up = Vec::new();
        for l in (0..config.levels.saturating_sub(1)).rev() {
            merge.push(Conv1d::pointwise(&mut s, &format!("merge{l}"), 2 * c, c));
            up.push(blocks(&mut s, &format!("up{l}")));
        }
        let out_norm = GroupNorm::new(&mut s, "out_norm", c, groups, true);
        let output = Conv1d::new(&mut s, "output", c, config.state_dim, 1, 1, 0);
        let null_fused = s.normal("null_fused", &[config.cond_dim, 1], 0.1);
        let null_gamma = s.constant("null_gamma", &[c, 1], 1.0);
        let null_beta = s.constant("null_beta", &[c, 1], 0.0);
        Self {
            config: config.clone(),
            time1,
            time2,
            input,
            down,
            downsample,
            merge,
            up,
            out_norm,
            output,
            null_fused,
            null_gamma,
            null_beta,
        }
    }
}

impl VectorField for UNet {
    fn velocity(&self, g: &mut Graph, x: Var, t: f64, cond: Option<&FieldCondition>) -> Result<Var> {
        let (cx, tx) = g.value(x).dims2();
        if cx != self.config.state_dim {
            return Err(shape_err(format!(
                "U-Net state has {} channels, given {cx}",
                self.config.state_dim
            )));
        }
        let (fused, gamma, beta) = match cond {
            Some(c) => (c.fused, c.gamma, c.beta),
            None => {
                let nf = g.param(self.null_fused);
                (g.repeat_cols(nf, tx)?, g.param(self.null_gamma), g.param(self.null_beta))
            }
        };
        if g.value(fused).cols() != tx {
            return Err(shape_err(format!(
                "condition has {} frames for a {tx}-frame state",
                g.value(fused).cols()
            )));
        }
        let e = g.constant(sinusoidal_embedding(t, self.config.time_dim));
        let e = self.time1.forward(g, e)?;
        let e = g.silu(e)?;
        let e = self.time2.forward(g, e)?;
        let temb = g.silu(e)?;

        let h = g.concat_rows(&[x, fused])?;
        let mut h = self.input.forward(g, h)?;
        let mut skips = Vec::new();
        for (l, blocks) in self.down.iter().enumerate() {
            for b in blocks {
                h = b.forward(g, h, temb, gamma, beta)?;
            }
            if let Some(ds) = self.downsample.get(l) {
                skips.push(h);
                h = ds.forward(g, h)?;
            }
        }
        for ((merge, blocks), skip) in self.merge.iter().zip(&self.up).zip(skips.iter().rev()) {
            let len = g.value(*skip).cols();
            let up = interpolate_time(g, h, len)?;
            let cat = g.concat_rows(&[up, *skip])?;
            h = merge.forward(g, cat)?;
            for b in blocks {
                h = b.forward(g, h, temb, gamma, beta)?;
            }
        }
        let h = self.out_norm.forward(g, h)?;
        let h = g.silu(h)?;
        self.output.forward(g, h)
    }
}
