use super::{Gradients, ParamStore, Tensor};
use crate::error::{invalid, shape_err, Result};

/// Hyper-parameters of the decoupled-weight-decay Adam update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First and second moments plus the step counter. Moments exist only for
/// trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Option<Tensor>>,
    pub v: Vec<Option<Tensor>>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = |store: &ParamStore| {
            store
                .iter()
                .map(|(_, p)| {
                    p.requires_grad
                        .then(|| Tensor::zeros(p.value.shape().to_vec()))
                })
                .collect::<Vec<_>>()
        };
        Self {
            step: 0,
            m: zeros(store),
            v: zeros(store),
        }
    }
}

/// One AdamW step over every trainable parameter:
/// `p ← p − lr·wd·p − lr·m̂/(√v̂ + ε)` with bias-corrected moments.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &AdamWConfig,
) -> Result<()> {
    if !(cfg.lr > 0.0) {
        return Err(invalid(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    if state.m.len() != store.len() {
        return Err(shape_err("optimizer state does not match parameter store"));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let ids: Vec<_> = store.trainable().collect();
    for id in ids {
        let g = grads
            .get(id)
            .ok_or_else(|| shape_err(format!("no gradient for {}", store.get(id).name)))?;
        let (Some(m), Some(v)) = (state.m[id.index()].as_mut(), state.v[id.index()].as_mut()) else {
            return Err(shape_err("missing optimizer moments"));
        };
        let p = store.value_mut(id);
        if p.shape() != g.shape() || m.shape() != g.shape() {
            return Err(shape_err(format!("adam shapes {:?} vs {:?}", p.shape(), g.shape())));
        }
        let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
        for (((pi, mi), vi), &gi) in pd.iter_mut().zip(md.iter_mut()).zip(vd.iter_mut()).zip(g.data()) {
            *pi -= cfg.lr * cfg.weight_decay * *pi;
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let mh = *mi / bc1;
            let vh = *vi / bc2;
            *pi -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
