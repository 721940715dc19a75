//! Define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] records every primitive applied during one forward pass in
//! creation order, which is already a topological order. [`Graph::backward`]
//! walks that record once in reverse. The graph borrows the parameter store
//! immutably, so several graphs (one per batch item) can share a store
//! across threads.

use std::collections::HashMap;

use super::linalg::{col2im_add, conv_out_len, gemm, im2col, Op};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{shape_err, Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Kind {
    Leaf,
    Matmul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddCol(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    Conv1d {
        x: Var,
        w: Var,
        stride: usize,
        padding: usize,
        cols: Vec<f64>,
    },
    LeakyRelu(Var, f64),
    Silu(Var),
    Softmax(Var, usize),
    NormChunks {
        x: Var,
        chunks: usize,
        inv_std: Vec<f64>,
    },
    MeanAxis(Var, usize),
    Sum(Var),
    Mean(Var),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    RepeatCols(Var),
    StraightThrough(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    kind: Kind,
    requires_grad: bool,
    param: Option<ParamId>,
}

/// Gradients for every trainable parameter of a store.
///
/// Frozen parameters have no entry; trainable parameters without a path to
/// the loss hold exact zeros.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        let grads = store
            .iter()
            .map(|(_, p)| {
                p.requires_grad
                    .then(|| Tensor::zeros(p.value.shape().to_vec()))
            })
            .collect();
        Self { grads }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        assert_eq!(self.grads.len(), other.grads.len());
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                    *x += scale * y;
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .map(Tensor::sq_norm)
            .sum::<f64>()
            .sqrt()
    }
}

pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, kind: Kind, requires_grad: bool, op: &str) -> Result<Var> {
        if value.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("output of {op}")));
        }
        self.nodes.push(Node {
            value,
            kind,
            requires_grad,
            param: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn mat(&self, v: Var, op: &str) -> Result<(usize, usize)> {
        let s = self.value(v).shape();
        if s.len() != 2 {
            return Err(shape_err(format!("{op} expects a matrix, got {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    /// Records a constant; it never receives gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            kind: Kind::Leaf,
            requires_grad: false,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Reads a parameter from the store. Repeated reads share one node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let p = self.store.get(id);
        self.nodes.push(Node {
            value: p.value.clone(),
            kind: Kind::Leaf,
            requires_grad: p.requires_grad,
            param: Some(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    /// Copy of `v` cut off from the graph.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.constant(t)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat(a, "matmul")?;
        let (k2, n) = self.mat(b, "matmul")?;
        if k != k2 {
            return Err(shape_err(format!("matmul [{m}x{k}] x [{k2}x{n}]")));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            Op::N,
            self.value(b).data(),
            Op::N,
            0.0,
            &mut out,
        );
        let rg = self.rg(&[a, b]);
        self.push(Tensor::from_parts(vec![m, n], out), Kind::Matmul(a, b), rg, "matmul")
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(shape_err(format!("{op}: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, op: &str, f: impl Fn(f64, f64) -> f64, kind: Kind) -> Result<Var> {
        self.same_shape(a, b, op)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::from_parts(ta.shape().to_vec(), data);
        let rg = self.rg(&[a, b]);
        self.push(t, kind, rg, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Kind::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Kind::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Kind::Mul(a, b))
    }

    fn col_check(&self, x: Var, v: Var, op: &str) -> Result<(usize, usize)> {
        let (c, t) = self.mat(x, op)?;
        let (vc, vt) = self.mat(v, op)?;
        if vc != c || vt != 1 {
            return Err(shape_err(format!("{op}: [{c}x{t}] with [{vc}x{vt}]")));
        }
        Ok((c, t))
    }

    /// `x[c, t] + v[c]`, broadcasting a column over time.
    pub fn add_col(&mut self, x: Var, v: Var) -> Result<Var> {
        let (c, t) = self.col_check(x, v, "add_col")?;
        let (xv, vv) = (self.value(x).data(), self.value(v).data());
        let mut out = xv.to_vec();
        for i in 0..c {
            out[i * t..(i + 1) * t].iter_mut().for_each(|o| *o += vv[i]);
        }
        let rg = self.rg(&[x, v]);
        self.push(Tensor::from_parts(vec![c, t], out), Kind::AddCol(x, v), rg, "add_col")
    }

    /// `x[c, t] · g[c]`, broadcasting a column over time.
    pub fn mul_col(&mut self, x: Var, g: Var) -> Result<Var> {
        let (c, t) = self.col_check(x, g, "mul_col")?;
        let (xv, gv) = (self.value(x).data(), self.value(g).data());
        let mut out = xv.to_vec();
        for i in 0..c {
            out[i * t..(i + 1) * t].iter_mut().for_each(|o| *o *= gv[i]);
        }
        let rg = self.rg(&[x, g]);
        self.push(Tensor::from_parts(vec![c, t], out), Kind::MulCol(x, g), rg, "mul_col")
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let t = self.value(x);
        let out = Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|v| v * s).collect());
        let rg = self.rg(&[x]);
        self.push(out, Kind::Scale(x, s), rg, "scale")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        self.mat(x, "transpose")?;
        let t = self.value(x).transpose();
        let rg = self.rg(&[x]);
        self.push(t, Kind::Transpose(x), rg, "transpose")
    }

    /// 1-D cross-correlation (no kernel flip):
    /// `y[o, t] = Σ_{i,k} w[o, i, k] · x_pad[i, t·stride + k]`
    /// for `x: [c_in, T]` and `w: [c_out, c_in, K]` with zero padding.
    pub fn conv1d(&mut self, x: Var, w: Var, stride: usize, padding: usize) -> Result<Var> {
        let (c_in, t) = self.mat(x, "conv1d")?;
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 3 || ws[1] != c_in {
            return Err(shape_err(format!("conv1d kernel {ws:?} for input [{c_in}x{t}]")));
        }
        let (c_out, k) = (ws[0], ws[2]);
        let t_out = conv_out_len(t, k, stride, padding).ok_or_else(|| {
            shape_err(format!(
                "conv1d kernel width {k} exceeds padded input {t}+2*{padding} (stride {stride})"
            ))
        })?;
        let cols = im2col(self.value(x).data(), c_in, t, k, stride, padding, t_out);
        let mut out = vec![0.0; c_out * t_out];
        gemm(
            c_out,
            c_in * k,
            t_out,
            self.value(w).data(),
            Op::N,
            &cols,
            Op::N,
            0.0,
            &mut out,
        );
        let rg = self.rg(&[x, w]);
        self.push(
            Tensor::from_parts(vec![c_out, t_out], out),
            Kind::Conv1d {
                x,
                w,
                stride,
                padding,
                cols,
            },
            rg,
            "conv1d",
        )
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let t = self.value(x);
        let out = t
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        let out = Tensor::from_parts(t.shape().to_vec(), out);
        let rg = self.rg(&[x]);
        self.push(out, Kind::LeakyRelu(x, slope), rg, "leaky_relu")
    }

    /// `x · sigmoid(x)`.
    pub fn silu(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let out = t.data().iter().map(|&v| v * sigmoid(v)).collect();
        let out = Tensor::from_parts(t.shape().to_vec(), out);
        let rg = self.rg(&[x]);
        self.push(out, Kind::Silu(x), rg, "silu")
    }

    /// Softmax of a matrix along `axis` (0: down columns, 1: along rows),
    /// computed with max subtraction.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let (r, c) = self.mat(x, "softmax")?;
        if axis > 1 {
            return Err(shape_err(format!("softmax axis {axis} on a matrix")));
        }
        let out = softmax_values(self.value(x).data(), r, c, axis);
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(vec![r, c], out), Kind::Softmax(x, axis), rg, "softmax")
    }

    /// Standardises each of `chunks` equal contiguous blocks of the data to
    /// zero mean and unit (biased) variance. Group norm over `[C, T]` is this
    /// with `chunks = groups`; layer norm over channels is this applied to
    /// the transpose with `chunks = T`.
    pub fn normalize_chunks(&mut self, x: Var, chunks: usize, eps: f64) -> Result<Var> {
        let t = self.value(x);
        let n = t.len();
        if chunks == 0 || n % chunks != 0 {
            return Err(shape_err(format!("{n} values into {chunks} chunks")));
        }
        let len = n / chunks;
        let mut out = t.data().to_vec();
        let mut inv_std = Vec::with_capacity(chunks);
        for chunk in out.chunks_mut(len) {
            let mean = chunk.iter().sum::<f64>() / len as f64;
            let var = chunk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len as f64;
            let is = 1.0 / (var + eps).sqrt();
            chunk.iter_mut().for_each(|v| *v = (*v - mean) * is);
            inv_std.push(is);
        }
        let out = Tensor::from_parts(t.shape().to_vec(), out);
        let rg = self.rg(&[x]);
        self.push(out, Kind::NormChunks { x, chunks, inv_std }, rg, "normalize")
    }

    /// Mean along `axis`, keeping it as an extent of one.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let (r, c) = self.mat(x, "mean_axis")?;
        let d = self.value(x).data();
        let out = match axis {
            0 => {
                let mut o = vec![0.0; c];
                for i in 0..r {
                    o.iter_mut().zip(&d[i * c..(i + 1) * c]).for_each(|(a, b)| *a += b);
                }
                o.iter_mut().for_each(|v| *v /= r as f64);
                Tensor::from_parts(vec![1, c], o)
            }
            1 => Tensor::from_parts(
                vec![r, 1],
                (0..r)
                    .map(|i| d[i * c..(i + 1) * c].iter().sum::<f64>() / c as f64)
                    .collect(),
            ),
            _ => return Err(shape_err(format!("mean axis {axis} on a matrix"))),
        };
        let rg = self.rg(&[x]);
        self.push(out, Kind::MeanAxis(x, axis), rg, "mean_axis")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(vec![1, 1], vec![s]), Kind::Sum(x), rg, "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).mean();
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(vec![1, 1], vec![s]), Kind::Mean(x), rg, "mean")
    }

    /// Mean squared difference, a scalar.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        self.mean(sq)
    }

    /// Channel concatenation of `[C_i, T]` matrices.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let t = Tensor::concat_rows(&tensors)?;
        let rg = self.rg(parts);
        self.push(t, Kind::ConcatRows(parts.to_vec()), rg, "concat_rows")
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x).slice_rows(start, len)?;
        let rg = self.rg(&[x]);
        self.push(t, Kind::SliceRows(x, start), rg, "slice_rows")
    }

    /// Broadcasts a column `[C, 1]` to `[C, t]`.
    pub fn repeat_cols(&mut self, v: Var, t: usize) -> Result<Var> {
        let (c, one) = self.mat(v, "repeat_cols")?;
        if one != 1 || t == 0 {
            return Err(shape_err(format!("repeat_cols of [{c}x{one}] to {t}")));
        }
        let d = self.value(v).data();
        let out = (0..c).flat_map(|i| std::iter::repeat_n(d[i], t)).collect();
        let rg = self.rg(&[v]);
        self.push(Tensor::from_parts(vec![c, t], out), Kind::RepeatCols(v), rg, "repeat_cols")
    }

    /// Forward value `replacement`, backward identity onto `x`
    /// (straight-through estimator).
    pub fn straight_through(&mut self, x: Var, replacement: Tensor) -> Result<Var> {
        if replacement.shape() != self.value(x).shape() {
            return Err(shape_err(format!(
                "straight_through {:?} vs {:?}",
                self.value(x).shape(),
                replacement.shape()
            )));
        }
        let rg = self.rg(&[x]);
        self.push(replacement, Kind::StraightThrough(x), rg, "straight_through")
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        let mut out = Gradients::zeros_like(self.store);
        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Some(pid) = node.param {
                if let Some(slot) = out.grads[pid.0].as_mut() {
                    slot.data_mut().iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                continue;
            }
            self.backprop_node(node, &g, &mut grads);
        }
        Ok(out)
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if self.nodes[v.0].requires_grad {
                let n = self.nodes[v.0].value.len();
                f(grads[v.0].get_or_insert_with(|| vec![0.0; n]));
            }
        };
        match &node.kind {
            Kind::Leaf => {}
            Kind::Matmul(a, b) => {
                let (m, k) = self.value(*a).dims2();
                let n = self.value(*b).cols();
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |da| gemm(m, n, k, g, Op::N, bv, Op::T, 1.0, da));
                acc(*b, &mut |db| gemm(k, m, n, av, Op::T, g, Op::N, 1.0, db));
            }
            Kind::Add(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| add_into(d, g));
            }
            Kind::Sub(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Kind::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |d| {
                    for ((x, gi), bi) in d.iter_mut().zip(g).zip(bv) {
                        *x += gi * bi;
                    }
                });
                acc(*b, &mut |d| {
                    for ((x, gi), ai) in d.iter_mut().zip(g).zip(av) {
                        *x += gi * ai;
                    }
                });
            }
            Kind::AddCol(x, v) => {
                let (c, t) = self.value(*x).dims2();
                acc(*x, &mut |d| add_into(d, g));
                acc(*v, &mut |d| {
                    for i in 0..c {
                        d[i] += g[i * t..(i + 1) * t].iter().sum::<f64>();
                    }
                });
            }
            Kind::MulCol(x, gm) => {
                let (c, t) = self.value(*x).dims2();
                let (xv, gv) = (self.value(*x).data(), self.value(*gm).data());
                acc(*x, &mut |d| {
                    for i in 0..c {
                        for j in 0..t {
                            d[i * t + j] += g[i * t + j] * gv[i];
                        }
                    }
                });
                acc(*gm, &mut |d| {
                    for i in 0..c {
                        d[i] += (0..t).map(|j| g[i * t + j] * xv[i * t + j]).sum::<f64>();
                    }
                });
            }
            Kind::Scale(x, s) => acc(*x, &mut |d| {
                d.iter_mut().zip(g).for_each(|(a, b)| *a += s * b)
            }),
            Kind::Transpose(x) => {
                let (r, c) = self.value(*x).dims2();
                acc(*x, &mut |d| {
                    for i in 0..r {
                        for j in 0..c {
                            d[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Kind::Conv1d {
                x,
                w,
                stride,
                padding,
                cols,
            } => {
                let (c_in, t) = self.value(*x).dims2();
                let ws = self.value(*w).shape();
                let (c_out, k) = (ws[0], ws[2]);
                let t_out = node.value.cols();
                acc(*w, &mut |dw| gemm(c_out, t_out, c_in * k, g, Op::N, cols, Op::T, 1.0, dw));
                let wv = self.value(*w).data();
                acc(*x, &mut |dx| {
                    let mut dcols = vec![0.0; c_in * k * t_out];
                    gemm(c_in * k, c_out, t_out, wv, Op::T, g, Op::N, 0.0, &mut dcols);
                    col2im_add(&dcols, c_in, t, k, *stride, *padding, t_out, dx);
                });
            }
            Kind::LeakyRelu(x, slope) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |d| {
                    for ((a, gi), xi) in d.iter_mut().zip(g).zip(xv) {
                        *a += if *xi > 0.0 { *gi } else { slope * gi };
                    }
                });
            }
            Kind::Silu(x) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |d| {
                    for ((a, gi), &xi) in d.iter_mut().zip(g).zip(xv) {
                        let s = sigmoid(xi);
                        *a += gi * s * (1.0 + xi * (1.0 - s));
                    }
                });
            }
            Kind::Softmax(x, axis) => {
                let (r, c) = node.value.dims2();
                let y = node.value.data();
                acc(*x, &mut |d| softmax_backward(y, g, r, c, *axis, d));
            }
            Kind::NormChunks { x, chunks, inv_std } => {
                let y = node.value.data();
                let len = y.len() / chunks;
                acc(*x, &mut |d| {
                    for (ci, is) in inv_std.iter().enumerate() {
                        let r = ci * len..(ci + 1) * len;
                        let (ys, gs) = (&y[r.clone()], &g[r.clone()]);
                        let mg = gs.iter().sum::<f64>() / len as f64;
                        let mgy = gs.iter().zip(ys).map(|(a, b)| a * b).sum::<f64>() / len as f64;
                        for ((dd, gi), yi) in d[r].iter_mut().zip(gs).zip(ys) {
                            *dd += is * (gi - mg - yi * mgy);
                        }
                    }
                });
            }
            Kind::MeanAxis(x, axis) => {
                let (r, c) = self.value(*x).dims2();
                acc(*x, &mut |d| {
                    for i in 0..r {
                        for j in 0..c {
                            d[i * c + j] += if *axis == 0 {
                                g[j] / r as f64
                            } else {
                                g[i] / c as f64
                            };
                        }
                    }
                });
            }
            Kind::Sum(x) => acc(*x, &mut |d| d.iter_mut().for_each(|a| *a += g[0])),
            Kind::Mean(x) => {
                let n = self.value(*x).len() as f64;
                acc(*x, &mut |d| d.iter_mut().for_each(|a| *a += g[0] / n));
            }
            Kind::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = self.value(*p).len();
                    acc(*p, &mut |d| add_into(d, &g[off..off + n]));
                    off += n;
                }
            }
            Kind::SliceRows(x, start) => {
                let c = self.value(*x).cols();
                let off = start * c;
                acc(*x, &mut |d| add_into(&mut d[off..off + g.len()], g));
            }
            Kind::RepeatCols(v) => {
                let t = node.value.cols();
                acc(*v, &mut |d| {
                    for (i, di) in d.iter_mut().enumerate() {
                        *di += g[i * t..(i + 1) * t].iter().sum::<f64>();
                    }
                });
            }
            Kind::StraightThrough(x) => acc(*x, &mut |d| add_into(d, g)),
        }
    }
}

fn add_into(d: &mut [f64], g: &[f64]) {
    d.iter_mut().zip(g).for_each(|(a, b)| *a += b);
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_values(x: &[f64], r: usize, c: usize, axis: usize) -> Vec<f64> {
    let mut out = x.to_vec();
    let (n_lines, len, stride, step) = if axis == 1 { (r, c, c, 1) } else { (c, r, 1, c) };
    for line in 0..n_lines {
        let idx = |k: usize| line * stride + k * step;
        let mx = (0..len).map(|k| x[idx(k)]).fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for k in 0..len {
            let e = (x[idx(k)] - mx).exp();
            out[idx(k)] = e;
            s += e;
        }
        for k in 0..len {
            out[idx(k)] /= s;
        }
    }
    out
}

fn softmax_backward(y: &[f64], g: &[f64], r: usize, c: usize, axis: usize, d: &mut [f64]) {
    let (n_lines, len, stride, step) = if axis == 1 { (r, c, c, 1) } else { (c, r, 1, c) };
    for line in 0..n_lines {
        let idx = |k: usize| line * stride + k * step;
        let dot: f64 = (0..len).map(|k| g[idx(k)] * y[idx(k)]).sum();
        for k in 0..len {
            d[idx(k)] += y[idx(k)] * (g[idx(k)] - dot);
        }
    }
}
