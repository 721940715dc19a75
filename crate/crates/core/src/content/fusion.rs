use crate::error::{shape_err, Result};
use crate::numerics::nn::{interpolate_time, Conv1d};
use crate::numerics::{Graph, Init, Var};

pub const LEAKY_SLOPE: f64 = 0.2;

/// Projects quantised SSL features into per-symbol coefficients and
/// modulates the posteriorgram with them:
/// `content = interp(LeakyReLU(conv2(LeakyReLU(conv1(x̂))))) ⊙ ppg`.
#[derive(Clone, Debug)]
pub struct AdaptiveFusion {
    conv1: Conv1d,
    conv2: Conv1d,
    pub out_dim: usize,
}

impl AdaptiveFusion {
    pub fn new(init: &mut Init, ssl_dim: usize, hidden: usize, ppg_dim: usize) -> Self {
        let mut s = init.scope("fusion");
        Self {
            conv1: Conv1d::same3(&mut s, "conv1", ssl_dim, hidden),
            conv2: Conv1d::same3(&mut s, "conv2", hidden, ppg_dim),
            out_dim: ppg_dim,
        }
    }

    /// `[D_ssl, T_ssl]` → coefficients `[D_p, T_ssl]`.
    pub fn coefficients(&self, g: &mut Graph, quantized: Var) -> Result<Var> {
        let h = self.conv1.forward(g, quantized)?;
        let h = g.leaky_relu(h, LEAKY_SLOPE)?;
        let h = self.conv2.forward(g, h)?;
        g.leaky_relu(h, LEAKY_SLOPE)
    }

    /// Content sequence `[D_p, T_p]`.
    pub fn forward(&self, g: &mut Graph, quantized: Var, ppg: Var) -> Result<Var> {
        let c = self.coefficients(g, quantized)?;
        modulate(g, c, ppg)
    }
}

/// Interpolates coefficients `[D_p, T_c]` to the posteriorgram length and
/// multiplies elementwise with `ppg: [D_p, T_p]`.
pub fn modulate(g: &mut Graph, coeffs: Var, ppg: Var) -> Result<Var> {
    let (dc, _) = g.value(coeffs).dims2();
    let (dp, tp) = g.value(ppg).dims2();
    if dc != dp {
        return Err(shape_err(format!("fusion gives {dc} channels for a {dp}-symbol posteriorgram")));
    }
    let c = interpolate_time(g, coeffs, tp)?;
    g.mul(c, ppg)
}
