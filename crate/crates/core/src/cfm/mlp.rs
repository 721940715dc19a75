use super::{FieldCondition, VectorField};
use crate::error::Result;
use crate::numerics::nn::{sinusoidal_embedding, Linear};
use crate::numerics::{Graph, Init, Var};

/// Small unconditional field for low-dimensional point clouds: each column
/// of `x` is one point.
#[derive(Clone, Debug)]
pub struct MlpField {
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
    pub time_dim: usize,
}

impl MlpField {
    pub fn new(init: &mut Init, dim: usize, hidden: usize, time_dim: usize) -> Self {
        let mut s = init.scope("mlp");
        Self {
            l1: Linear::new(&mut s, "l1", dim + time_dim, hidden),
            l2: Linear::new(&mut s, "l2", hidden, hidden),
            l3: Linear::new(&mut s, "l3", hidden, dim),
            time_dim,
        }
    }
}

impl VectorField for MlpField {
    fn velocity(&self, g: &mut Graph, x: Var, t: f64, _cond: Option<&FieldCondition>) -> Result<Var> {
        let n = g.value(x).cols();
        let e = g.constant(sinusoidal_embedding(t, self.time_dim));
        let e = g.repeat_cols(e, n)?;
        let h = g.concat_rows(&[x, e])?;
        let h = self.l1.forward(g, h)?;
        let h = g.silu(h)?;
        let h = self.l2.forward(g, h)?;
        let h = g.silu(h)?;
        self.l3.forward(g, h)
    }
}
