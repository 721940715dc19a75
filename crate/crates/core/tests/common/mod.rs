#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vcflow::numerics::{Graph, ParamId, ParamStore, Tensor, Var};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

/// Scalar `Σ w ⊙ y` with fixed random weights, so every output element
/// feeds the loss with an O(1) weight.
pub fn probe(g: &mut Graph, y: Var, w: &Tensor) -> Var {
    let wv = g.constant(w.clone());
    let p = g.mul(y, wv).unwrap();
    g.sum(p).unwrap()
}

#[derive(Debug, Default, Clone)]
pub struct FdStats {
    pub max_rel: f64,
    /// Analytic and numeric values at the worst element.
    pub worst: (f64, f64),
    pub worst_param: String,
    pub checked: usize,
    /// Elements below the resolution floor.
    pub floored: usize,
    pub floor: f64,
}

/// Rounding in the loss itself, in units of ε·|L|.
pub const FD_ROUNDING_ULPS: f64 = 10.0;

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Smallest gradient magnitude whose central difference at `FD_STEP` is
/// resolvable to `FD_TOL` given a loss of size `loss`.
pub fn fd_floor(loss: f64) -> f64 {
    FD_ROUNDING_ULPS * f64::EPSILON * loss.abs().max(1.0) / (FD_STEP * FD_TOL)
}

/// Central differences for up to `per_param` random elements of every
/// trainable parameter, against the tape's gradient.
pub fn fd_check(
    store: &mut ParamStore,
    per_param: usize,
    seed: u64,
    loss: &dyn Fn(&mut Graph) -> Var,
) -> FdStats {
    let (grads, base) = {
        let mut g = Graph::new(store);
        let l = loss(&mut g);
        (g.backward(l).unwrap(), g.value(l).data()[0])
    };
    let eval = |store: &ParamStore| {
        let mut g = Graph::new(store);
        let l = loss(&mut g);
        g.value(l).data()[0]
    };
    let mut r = rng(seed ^ 0xfd);
    let ids: Vec<ParamId> = store.trainable().collect();
    let mut stats = FdStats {
        floor: fd_floor(base),
        ..Default::default()
    };
    for id in ids {
        let n = store.value(id).len();
        let picks: Vec<usize> = if n <= per_param {
            (0..n).collect()
        } else {
            (0..per_param).map(|_| r.random_range(0..n)).collect()
        };
        for idx in picks {
            let orig = store.value(id).data()[idx];
            store.perturb(id, idx, FD_STEP);
            let up = eval(store);
            let cur = store.value(id).data()[idx];
            store.perturb(id, idx, orig - FD_STEP - cur);
            let down = eval(store);
            let cur = store.value(id).data()[idx];
            store.perturb(id, idx, orig - cur);
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.get(id).map_or(0.0, |g| g.data()[idx]);
            let e = rel_err(analytic, numeric, stats.floor);
            if analytic.abs().max(numeric.abs()) < stats.floor {
                stats.floored += 1;
            }
            if e > stats.max_rel {
                stats.max_rel = e;
                stats.worst = (analytic, numeric);
                stats.worst_param = store.get(id).name.clone();
            }
            stats.checked += 1;
        }
    }
    stats
}

/// A model small enough to train for a few steps inside a unit test.
pub const TINY: &str = r#"
[model]
ssl_dim = 8
fusion_hidden = 8
spk_dim = 16
memory_dim = 8
memory_heads = 2
memory_blocks = 1
context_dim = 8
context_heads = 2
context_blocks = 1
context_ff = 16
unet_hidden = 8
unet_levels = 2
unet_blocks = 1
time_dim = 8
norm_groups = 2

[rvq]
codebook_size = 16

[train]
batch_size = 2
crop_samples = 10240
lr = 1e-3

[reference]
min_secs = 1.0
max_secs = 1.5

[eval]
griffin_lim_iters = 4
"#;
