use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cfg_combine, standard_normal, ConditionSet, VectorField};
use crate::error::{invalid, Result};
use crate::numerics::{Graph, ParamStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_steps: usize,
    pub cfg_gamma: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_steps: 10,
            cfg_gamma: 0.7,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(invalid("sampler needs at least one step"));
        }
        if !(self.cfg_gamma >= 0.0 && self.cfg_gamma.is_finite()) {
            return Err(invalid(format!("guidance {} must be finite and >= 0", self.cfg_gamma)));
        }
        Ok(())
    }
}

/// Forward Euler from `x0 ~ N(0, I)` of the given shape:
/// `x ← x + v(x, k/K) / K` for `k = 0..K`, with guidance applied whenever a
/// condition is present and `γ > 0`.
pub fn euler_sample(
    field: &dyn VectorField,
    store: &ParamStore,
    cond: Option<&ConditionSet>,
    cfg: &SamplerConfig,
    shape: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<Tensor> {
    let x0 = standard_normal(shape, rng);
    euler_from(field, store, cond, cfg, x0)
}

/// [`euler_sample`] from a given starting state.
pub fn euler_from(
    field: &dyn VectorField,
    store: &ParamStore,
    cond: Option<&ConditionSet>,
    cfg: &SamplerConfig,
    x0: Tensor,
) -> Result<Tensor> {
    cfg.validate()?;
    let k = cfg.n_steps;
    let dt = 1.0 / k as f64;
    let mut x = x0;
    for step in 0..k {
        let t = step as f64 / k as f64;
        let mut g = Graph::new(store);
        let xv = g.constant(x.clone());
        let bound = cond.and_then(|c| c.bind(&mut g));
        let vc = field.velocity(&mut g, xv, t, bound.as_ref())?;
        let v = if bound.is_some() && cfg.cfg_gamma != 0.0 {
            let vu = field.velocity(&mut g, xv, t, None)?;
            cfg_combine(g.value(vc), g.value(vu), cfg.cfg_gamma)?
        } else {
            g.value(vc).clone()
        };
        x = x.zip_map(&v, |a, b| a + dt * b)?;
    }
    Ok(x)
}
