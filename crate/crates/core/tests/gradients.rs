mod common;

use common::{fd_check, normal, probe, rng, FD_TOL};
use vcflow::content::{commit_loss, Rvq};
use vcflow::cfm::{cfm_loss, FieldCondition, FlowPathParams, MlpField, UNet, UNetConfig};
use vcflow::numerics::{Graph, Init, ParamStore, Tensor, Var};
use vcflow::pipeline::total_loss;

/// Registers `shapes` as trainable inputs and checks `f` on them.
fn check_op(seed: u64, shapes: &[&[usize]], f: &dyn Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let mut store = ParamStore::new();
    let mut r = rng(seed);
    let ids: Vec<_> = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| store.add(format!("x{i}"), normal(s, &mut r), true))
        .collect();
    let probe_shape = {
        let g0 = Graph::new(&store);
        let mut g = g0;
        let xs: Vec<Var> = ids.iter().map(|&id| g.param(id)).collect();
        let y = f(&mut g, &xs);
        g.value(y).shape().to_vec()
    };
    let w = normal(&probe_shape, &mut r);
    let stats = fd_check(&mut store, 40, seed, &|g| {
        let xs: Vec<Var> = ids.iter().map(|&id| g.param(id)).collect();
        let y = f(g, &xs);
        probe(g, y, &w)
    });
    stats.max_rel
}

fn assert_op(name: &str, shapes: &[&[usize]], f: &dyn Fn(&mut Graph, &[Var]) -> Var) {
    for seed in 0..3 {
        let e = check_op(seed, shapes, f);
        assert!(e < FD_TOL, "{name} seed {seed}: relative error {e:.2e}");
    }
}

#[test]
fn elementwise_ops() {
    assert_op("add", &[&[3, 4], &[3, 4]], &|g, x| g.add(x[0], x[1]).unwrap());
    assert_op("sub", &[&[3, 4], &[3, 4]], &|g, x| g.sub(x[0], x[1]).unwrap());
    assert_op("mul", &[&[3, 4], &[3, 4]], &|g, x| g.mul(x[0], x[1]).unwrap());
    assert_op("scale", &[&[3, 4]], &|g, x| g.scale(x[0], -1.7).unwrap());
    assert_op("leaky_relu", &[&[5, 4]], &|g, x| g.leaky_relu(x[0], 0.2).unwrap());
    assert_op("silu", &[&[5, 4]], &|g, x| g.silu(x[0]).unwrap());
}

#[test]
fn broadcast_and_layout_ops() {
    assert_op("add_col", &[&[3, 5], &[3, 1]], &|g, x| g.add_col(x[0], x[1]).unwrap());
    assert_op("mul_col", &[&[3, 5], &[3, 1]], &|g, x| g.mul_col(x[0], x[1]).unwrap());
    assert_op("transpose", &[&[3, 5]], &|g, x| g.transpose(x[0]).unwrap());
    assert_op("repeat_cols", &[&[4, 1]], &|g, x| g.repeat_cols(x[0], 6).unwrap());
    assert_op("slice_rows", &[&[6, 3]], &|g, x| g.slice_rows(x[0], 2, 3).unwrap());
    assert_op("concat_rows", &[&[2, 3], &[4, 3]], &|g, x| g.concat_rows(&[x[0], x[1]]).unwrap());
}

#[test]
fn linear_algebra_ops() {
    assert_op("matmul", &[&[3, 4], &[4, 5]], &|g, x| g.matmul(x[0], x[1]).unwrap());
    assert_op("conv1d", &[&[3, 9], &[4, 3, 3]], &|g, x| g.conv1d(x[0], x[1], 1, 1).unwrap());
    assert_op("strided conv1d", &[&[3, 10], &[2, 3, 4]], &|g, x| g.conv1d(x[0], x[1], 2, 1).unwrap());
}

#[test]
fn reduction_and_normalisation_ops() {
    assert_op("softmax rows", &[&[3, 5]], &|g, x| g.softmax(x[0], 1).unwrap());
    assert_op("softmax cols", &[&[3, 5]], &|g, x| g.softmax(x[0], 0).unwrap());
    assert_op("normalize_chunks", &[&[4, 5]], &|g, x| g.normalize_chunks(x[0], 2, 1e-5).unwrap());
    assert_op("mean_axis", &[&[4, 5]], &|g, x| g.mean_axis(x[0], 1).unwrap());
    assert_op("mse", &[&[4, 5], &[4, 5]], &|g, x| g.mse(x[0], x[1]).unwrap());
    assert_op("mean", &[&[4, 5]], &|g, x| g.mean(x[0]).unwrap());
}

#[test]
fn straight_through_passes_gradient_unchanged() {
    let mut store = ParamStore::new();
    let id = store.add("x", normal(&[2, 3], &mut rng(1)), true);
    let mut g = Graph::new(&store);
    let x = g.param(id);
    let y = g.straight_through(x, Tensor::full(&[2, 3], 5.0)).unwrap();
    assert!(g.value(y).data().iter().all(|&v| (v - 5.0).abs() < 1e-12));
    let w = normal(&[2, 3], &mut rng(2));
    let l = probe(&mut g, y, &w);
    let grads = g.backward(l).unwrap();
    assert!(grads.get(id).unwrap().bit_eq(&w));
}

#[test]
fn flow_matching_loss_gradient() {
    for seed in 0..3 {
        let mut store = ParamStore::new();
        let mut r = rng(seed);
        let field = MlpField::new(&mut Init::new(&mut store, &mut r), 3, 16, 8);
        let x1 = normal(&[3, 7], &mut r);
        let s = fd_check(&mut store, 20, seed, &|g| {
            let mut lr = rng(100 + seed);
            cfm_loss(g, &field, &x1, None, FlowPathParams::default(), 0.0, &mut lr).unwrap().loss
        });
        assert!(s.max_rel < FD_TOL, "seed {seed}: {:.2e} at {:?}", s.max_rel, s.worst);
    }
}

#[test]
fn conditional_loss_gradient_reaches_the_condition() {
    let mut store = ParamStore::new();
    let mut r = rng(4);
    let cfg = UNetConfig {
        state_dim: 2,
        cond_dim: 3,
        hidden: 8,
        levels: 2,
        blocks_per_level: 1,
        groups: 2,
        time_dim: 8,
    };
    let net = UNet::new(&mut Init::new(&mut store, &mut r), &cfg);
    let fused = store.add("cond.fused", normal(&[3, 4], &mut r), true);
    let gamma = store.add("cond.gamma", Tensor::full(&[8, 1], 1.0), true);
    let beta = store.add("cond.beta", normal(&[8, 1], &mut r), true);
    let x1 = normal(&[2, 4], &mut r);
    let loss = |g: &mut Graph| {
        let c = FieldCondition {
            fused: g.param(fused),
            gamma: g.param(gamma),
            beta: g.param(beta),
        };
        let mut lr = rng(9);
        cfm_loss(g, &net, &x1, Some(&c), FlowPathParams::default(), 0.0, &mut lr).unwrap().loss
    };
    let s = fd_check(&mut store, 10, 4, &loss);
    assert!(s.max_rel < FD_TOL, "{:.2e}", s.max_rel);
    let mut g = Graph::new(&store);
    let l = loss(&mut g);
    let grads = g.backward(l).unwrap();
    for id in [fused, gamma, beta] {
        assert!(grads.get(id).unwrap().sq_norm() > 0.0);
    }
}

#[test]
fn total_loss_weights_the_commitment_term() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let cfm = g.constant(Tensor::scalar(1.0).unwrap());
    let commit = g.constant(Tensor::scalar(2.0).unwrap());
    let l = total_loss(&mut g, cfm, commit, 0.01).unwrap();
    assert!((g.value(l).data()[0] - 1.02).abs() < 1e-15);
    let l0 = total_loss(&mut g, cfm, commit, 0.0).unwrap();
    assert_eq!(g.value(l0).data()[0], 1.0);
}

#[test]
fn total_loss_gradient_splits_by_lambda() {
    let mut store = ParamStore::new();
    let a = store.add("a", normal(&[3, 2], &mut rng(5)), true);
    let b = store.add("b", normal(&[3, 2], &mut rng(6)), true);
    let mut g = Graph::new(&store);
    let (av, bv) = (g.param(a), g.param(b));
    let la = g.sum(av).unwrap();
    let lb = g.sum(bv).unwrap();
    let l = total_loss(&mut g, la, lb, 0.25).unwrap();
    let grads = g.backward(l).unwrap();
    assert!(grads.get(a).unwrap().data().iter().all(|&v| v == 1.0));
    assert!(grads.get(b).unwrap().data().iter().all(|&v| v == 0.25));
}

#[test]
fn commitment_gradient_is_twice_the_residual_over_frames() {
    let rvq = Rvq::random(1, 8, 3, 2).unwrap();
    let x = normal(&[5, 3], &mut rng(3));
    let q = rvq.quantize(&x).unwrap();
    let mut store = ParamStore::new();
    let id = store.add("x", x.transpose(), true);
    let s = fd_check(&mut store, 15, 3, &|g| {
        let xv = g.param(id);
        commit_loss(g, xv, &q).unwrap()
    });
    assert!(s.max_rel < FD_TOL, "{:.2e}", s.max_rel);
    let mut g = Graph::new(&store);
    let xv = g.param(id);
    let l = commit_loss(&mut g, xv, &q).unwrap();
    let grads = g.backward(l).unwrap();
    let want = x.zip_map(&q.vectors, |a, b| 2.0 * (a - b) / 5.0).unwrap().transpose();
    assert!(grads.get(id).unwrap().max_abs_diff(&want) < 1e-14);
}
