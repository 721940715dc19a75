use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ot_path, ot_target, FieldCondition, FlowPathParams, VectorField};
use crate::error::Result;
use crate::numerics::{Graph, Tensor, Var};

pub fn standard_normal(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(shape.to_vec(), data).expect("finite normal draws")
}

pub struct CfmLoss {
    pub loss: Var,
    pub t: f64,
    /// Whether the condition was replaced by the null condition.
    pub dropped: bool,
}

/// Flow-matching regression for one example: draws `t ~ U(0,1)`,
/// `x0 ~ N(0, I)`, drops the condition with probability `p_drop`, and
/// returns the mean squared error between the net's velocity at `φ_t` and
/// the straight-path target.
pub fn cfm_loss(
    g: &mut Graph,
    field: &dyn VectorField,
    x1: &Tensor,
    cond: Option<&FieldCondition>,
    p: FlowPathParams,
    p_drop: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CfmLoss> {
    let t: f64 = rng.random();
    let x0 = standard_normal(x1.shape(), rng);
    let dropped = cond.is_some() && rng.random::<f64>() < p_drop;
    let cond = if dropped { None } else { cond };
    let xt = g.constant(ot_path(&x0, x1, t, p)?);
    let target = g.constant(ot_target(&x0, x1, p)?);
    let v = field.velocity(g, xt, t, cond)?;
    Ok(CfmLoss {
        loss: g.mse(v, target)?,
        t,
        dropped,
    })
}
