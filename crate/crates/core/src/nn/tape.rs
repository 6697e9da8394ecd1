//! Reverse-mode differentiation over a recorded computation.
//!
//! A [`Tape`] borrows a [`ParamStore`] read-only, records every operation of
//! one forward pass and then walks the record backwards to produce
//! [`Gradients`]. Tapes are cheap and meant to be built per example.

use super::param::{Gradients, ParamId, ParamStore};
use super::tensor::{gemm_acc, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

#[derive(Debug, Clone, Copy)]
struct ConvDims {
    batch: usize,
    kernels: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
}

impl ConvDims {
    fn out_h(&self) -> usize {
        self.h - self.kh + 1
    }
    fn out_w(&self) -> usize {
        self.w - self.kw + 1
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Act(Var, Activation),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SegmentMean(Var, Vec<Vec<usize>>),
    SigmoidNormalizeCols(Var),
    ConvexCols(Var, Var),
    SumRows(Var),
    SumAll(Var),
    Reshape(Var),
    Conv2d(Var, Var, Var, ConvDims),
    MaxPoolSpatial(Var, Vec<usize>),
    /// Scalar whose gradient w.r.t. the input was computed by the caller.
    Custom(Var, Tensor),
}

struct Node {
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.value(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Data with no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant, false)
    }

    /// Copy of `v` that blocks gradient.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.constant(t)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    fn mat(&self, v: Var) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(Error::dim(format!("expected a matrix, got shape {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat(a)?;
        let (k2, n) = self.mat(b)?;
        if k != k2 {
            return Err(Error::dim(format!(
                "matmul inner dimensions disagree: {:?} x {:?}",
                [m, k],
                [k2, n]
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            &mut out,
        );
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::MatMul(a, b), ng))
    }

    /// `a[m×n] + b[n]` broadcast over rows.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        if self.value(b).len() != n {
            return Err(Error::dim(format!(
                "bias of length {} for {:?}",
                self.value(b).len(),
                [m, n]
            )));
        }
        let bias = self.value(b).data().to_vec();
        let mut out = self.value(a).clone();
        for row in out.data_mut().chunks_mut(n) {
            for (x, bb) in row.iter_mut().zip(&bias) {
                *x += bb;
            }
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::AddBias(a, b), ng))
    }

    fn same_shape(&self, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        self.same_shape(a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::new(self.shape(a), data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `scale · a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let out = self.value(a).map(|x| scale * x + shift);
        let ng = self.ng(a);
        self.push(out, Op::Affine(a, scale), ng)
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let out = match kind {
            Activation::Relu => self.value(a).map(|x| x.max(0.0)),
            Activation::Sigmoid => self.value(a).map(sigmoid),
            Activation::Tanh => self.value(a).map(f64::tanh),
        };
        let ng = self.ng(a);
        self.push(out, Op::Act(a, kind), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Relu)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Tanh)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.mat(parts[0])?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.mat(p)?;
            if r != rows {
                return Err(Error::dim(format!("concat_cols row mismatch {r} vs {rows}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::new(&[rows, total], out)?, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.mat(parts[0])?.1;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.mat(p)?;
            if c != cols {
                return Err(Error::dim(format!("concat_rows column mismatch {c} vs {cols}")));
            }
            rows += r;
            out.extend_from_slice(self.value(p).data());
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::new(&[rows, cols], out)?, Op::ConcatRows(parts.to_vec()), ng))
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        if rows.is_empty() || rows.iter().any(|&r| r >= m) {
            return Err(Error::dim(format!("row index out of range for {m} rows")));
        }
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            out.extend_from_slice(self.value(a).row(r));
        }
        let ng = self.ng(a);
        Ok(self.push(
            Tensor::new(&[rows.len(), n], out)?,
            Op::GatherRows(a, rows.to_vec()),
            ng,
        ))
    }

    /// Row `g` of the output is the mean of rows `groups[g]` of `a`.
    pub fn segment_mean(&mut self, a: Var, groups: &[Vec<usize>]) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        if groups.is_empty() {
            return Err(Error::dim("segment_mean with no groups"));
        }
        let mut out = vec![0.0; groups.len() * n];
        for (g, rows) in groups.iter().enumerate() {
            if rows.is_empty() || rows.iter().any(|&r| r >= m) {
                return Err(Error::dim("segment_mean group empty or out of range"));
            }
            let inv = 1.0 / rows.len() as f64;
            for &r in rows {
                for (o, x) in out[g * n..(g + 1) * n].iter_mut().zip(self.value(a).row(r)) {
                    *o += inv * x;
                }
            }
        }
        let ng = self.ng(a);
        Ok(self.push(
            Tensor::new(&[groups.len(), n], out)?,
            Op::SegmentMean(a, groups.to_vec()),
            ng,
        ))
    }

    /// `σ(a)` normalised to sum to one in every column, computed in the log
    /// domain so columns whose sigmoids all underflow stay well defined.
    pub fn sigmoid_normalize_cols(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        let logs = self.value(a).map(log_sigmoid);
        let mut max = vec![f64::NEG_INFINITY; n];
        for row in logs.data().chunks(n) {
            for (mx, &l) in max.iter_mut().zip(row) {
                *mx = mx.max(l);
            }
        }
        let mut out = logs;
        for row in out.data_mut().chunks_mut(n) {
            for (x, mx) in row.iter_mut().zip(&max) {
                *x = (*x - mx).exp();
            }
        }
        let sums = col_sums(&out, m, n);
        for row in out.data_mut().chunks_mut(n) {
            for (x, s) in row.iter_mut().zip(&sums) {
                *x /= s;
            }
        }
        let ng = self.ng(a);
        Ok(self.push(out, Op::SigmoidNormalizeCols(a), ng))
    }

    /// `1×n` row of `Σ_i w_ik v_ik` for column weights `w` that sum to one.
    /// Each result is clamped to the range of its column of `v`, which only
    /// removes rounding error; the gradient is that of the plain sum.
    pub fn convex_cols(&mut self, w: Var, v: Var) -> Result<Var> {
        let (m, n) = self.mat(w)?;
        if self.mat(v)? != (m, n) {
            return Err(Error::dim("convex_cols needs equally shaped weights and values"));
        }
        let (wd, vd) = (self.value(w).data(), self.value(v).data());
        let mut out = vec![0.0; n];
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for r in 0..m {
            for c in 0..n {
                let x = vd[r * n + c];
                out[c] += wd[r * n + c] * x;
                lo[c] = lo[c].min(x);
                hi[c] = hi[c].max(x);
            }
        }
        for c in 0..n {
            out[c] = out[c].clamp(lo[c], hi[c]);
        }
        let ng = self.ng(w) || self.ng(v);
        Ok(self.push(Tensor::new(&[1, n], out)?, Op::ConvexCols(w, v), ng))
    }

    /// Column sums as a `1×n` matrix.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        let sums = col_sums(self.value(a), m, n);
        let ng = self.ng(a);
        Ok(self.push(Tensor::new(&[1, n], sums)?, Op::SumRows(a), ng))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::SumAll(a), ng)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape)?;
        let ng = self.ng(a);
        Ok(self.push(out, Op::Reshape(a), ng))
    }

    /// Valid, stride-1 cross-correlation of `x[B×1×H×W]` with
    /// `kernels[K×1×kh×kw]` plus a per-kernel bias, giving `[B×K×H'×W']`.
    pub fn conv2d(&mut self, x: Var, kernels: Var, bias: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ks = self.shape(kernels).to_vec();
        if xs.len() != 4 || xs[1] != 1 || ks.len() != 4 || ks[1] != 1 {
            return Err(Error::dim(format!(
                "conv2d expects [B,1,H,W] and [K,1,kh,kw], got {xs:?} and {ks:?}"
            )));
        }
        let d = ConvDims {
            batch: xs[0],
            kernels: ks[0],
            h: xs[2],
            w: xs[3],
            kh: ks[2],
            kw: ks[3],
        };
        if d.kh > d.h || d.kw > d.w {
            return Err(Error::dim(format!(
                "kernel {}x{} larger than input {}x{}",
                d.kh, d.kw, d.h, d.w
            )));
        }
        if self.value(bias).len() != d.kernels {
            return Err(Error::dim("conv2d bias length must equal kernel count"));
        }
        let (oh, ow) = (d.out_h(), d.out_w());
        let xv = self.value(x).data();
        let kv = self.value(kernels).data();
        let bv = self.value(bias).data();
        let mut out = vec![0.0; d.batch * d.kernels * oh * ow];
        for b in 0..d.batch {
            let img = &xv[b * d.h * d.w..(b + 1) * d.h * d.w];
            for k in 0..d.kernels {
                let ker = &kv[k * d.kh * d.kw..(k + 1) * d.kh * d.kw];
                let base = (b * d.kernels + k) * oh * ow;
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = bv[k];
                        for u in 0..d.kh {
                            let irow = &img[(i + u) * d.w + j..(i + u) * d.w + j + d.kw];
                            let krow = &ker[u * d.kw..(u + 1) * d.kw];
                            for (a, c) in irow.iter().zip(krow) {
                                acc += a * c;
                            }
                        }
                        out[base + i * ow + j] = acc;
                    }
                }
            }
        }
        let ng = self.ng(x) || self.ng(kernels) || self.ng(bias);
        let t = Tensor::new(&[d.batch, d.kernels, oh, ow], out)?;
        Ok(self.push(t, Op::Conv2d(x, kernels, bias, d), ng))
    }

    /// Global max over the two trailing axes: `[B×K×H×W] → [B×K]`.
    pub fn max_pool_spatial(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Error::dim(format!("max_pool_spatial expects rank 4, got {s:?}")));
        }
        let area = s[2] * s[3];
        let data = self.value(x).data();
        let mut out = Vec::with_capacity(s[0] * s[1]);
        let mut arg = Vec::with_capacity(s[0] * s[1]);
        for (m, map) in data.chunks(area).enumerate() {
            let (best, val) = map
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            out.push(val);
            arg.push(m * area + best);
        }
        let ng = self.ng(x);
        Ok(self.push(Tensor::new(&[s[0], s[1]], out)?, Op::MaxPoolSpatial(x, arg), ng))
    }

    /// Records a scalar `value` computed outside the tape from `input`,
    /// together with its gradient with respect to `input`.
    pub fn custom_scalar(&mut self, input: Var, value: f64, grad: Tensor) -> Result<Var> {
        if grad.shape() != self.shape(input) {
            return Err(Error::dim("custom_scalar gradient shape must match its input"));
        }
        let ng = self.ng(input);
        Ok(self.push(Tensor::scalar(value), Op::Custom(input, grad), ng))
    }

    /// Gradients of the scalar `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Gradients {
        let seed = Tensor::full(self.shape(loss), 1.0);
        self.backward_with(loss, seed)
    }

    /// Reverse pass seeded with an explicit upstream gradient for `out`.
    pub fn backward_with(&self, out: Var, seed: Tensor) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[out.0] = Some(seed);
        let mut result = Gradients::empty(self.store.len());

        for idx in (0..=out.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let shape = self.store.value(*id).shape().to_vec();
                    result.slot(*id, &shape).add_assign(&g);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.value(*a).as_matrix();
                    let n = self.value(*b).as_matrix().1;
                    if self.ng(*a) {
                        let acc = acc_slot(&mut grads, *a, self.value(*a).shape());
                        gemm_acc(m, n, k, g.data(), false, self.value(*b).data(), true, acc.data_mut());
                    }
                    if self.ng(*b) {
                        let acc = acc_slot(&mut grads, *b, self.value(*b).shape());
                        gemm_acc(k, m, n, self.value(*a).data(), true, g.data(), false, acc.data_mut());
                    }
                }
                Op::AddBias(a, b) => {
                    if self.ng(*b) {
                        let (m, n) = g.as_matrix();
                        let sums = col_sums(&g, m, n);
                        let acc = acc_slot(&mut grads, *b, self.value(*b).shape());
                        for (x, s) in acc.data_mut().iter_mut().zip(sums) {
                            *x += s;
                        }
                    }
                    if self.ng(*a) {
                        acc_slot(&mut grads, *a, g.shape()).add_assign(&g);
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if self.ng(v) {
                            acc_slot(&mut grads, v, g.shape()).add_assign(&g);
                        }
                    }
                }
                Op::Sub(a, b) => {
                    if self.ng(*a) {
                        acc_slot(&mut grads, *a, g.shape()).add_assign(&g);
                    }
                    if self.ng(*b) {
                        let acc = acc_slot(&mut grads, *b, g.shape());
                        for (x, y) in acc.data_mut().iter_mut().zip(g.data()) {
                            *x -= y;
                        }
                    }
                }
                Op::Mul(a, b) => {
                    for (v, other) in [(*a, *b), (*b, *a)] {
                        if self.ng(v) {
                            let o = self.value(other).data().to_vec();
                            let acc = acc_slot(&mut grads, v, g.shape());
                            for ((x, y), z) in acc.data_mut().iter_mut().zip(g.data()).zip(o) {
                                *x += y * z;
                            }
                        }
                    }
                }
                Op::Affine(a, s) => {
                    let acc = acc_slot(&mut grads, *a, g.shape());
                    for (x, y) in acc.data_mut().iter_mut().zip(g.data()) {
                        *x += s * y;
                    }
                }
                Op::Act(a, kind) => {
                    let y = node.value.as_ref().expect("activation output").data().to_vec();
                    let xin = self.value(*a).data().to_vec();
                    let acc = acc_slot(&mut grads, *a, g.shape());
                    for (i, (x, gy)) in acc.data_mut().iter_mut().zip(g.data()).enumerate() {
                        let d = match kind {
                            Activation::Relu => {
                                if xin[i] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Activation::Sigmoid => y[i] * (1.0 - y[i]),
                            Activation::Tanh => 1.0 - y[i] * y[i],
                        };
                        *x += gy * d;
                    }
                }
                Op::ConcatCols(parts) => {
                    let (rows, total) = g.as_matrix();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).as_matrix().1;
                        if self.ng(p) {
                            let acc = acc_slot(&mut grads, p, self.value(p).shape());
                            for r in 0..rows {
                                let src = &g.data()[r * total + offset..r * total + offset + w];
                                for (x, y) in acc.data_mut()[r * w..(r + 1) * w].iter_mut().zip(src) {
                                    *x += y;
                                }
                            }
                        }
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        if self.ng(p) {
                            let acc = acc_slot(&mut grads, p, self.value(p).shape());
                            for (x, y) in acc.data_mut().iter_mut().zip(&g.data()[offset..offset + len]) {
                                *x += y;
                            }
                        }
                        offset += len;
                    }
                }
                Op::GatherRows(a, rows) => {
                    let n = g.as_matrix().1;
                    let acc = acc_slot(&mut grads, *a, self.value(*a).shape());
                    for (i, &r) in rows.iter().enumerate() {
                        for c in 0..n {
                            acc.data_mut()[r * n + c] += g.data()[i * n + c];
                        }
                    }
                }
                Op::SegmentMean(a, groups) => {
                    let n = g.as_matrix().1;
                    let acc = acc_slot(&mut grads, *a, self.value(*a).shape());
                    for (gi, rows) in groups.iter().enumerate() {
                        let inv = 1.0 / rows.len() as f64;
                        for &r in rows {
                            for c in 0..n {
                                acc.data_mut()[r * n + c] += inv * g.data()[gi * n + c];
                            }
                        }
                    }
                }
                Op::SigmoidNormalizeCols(a) => {
                    // dα_i/dz_k = α_i (δ_ik − α_k) (1 − σ(z_k))
                    let (m, n) = g.as_matrix();
                    let y = node.value.as_ref().expect("normalize output");
                    let mut dots = vec![0.0; n];
                    for r in 0..m {
                        for c in 0..n {
                            dots[c] += g.data()[r * n + c] * y.data()[r * n + c];
                        }
                    }
                    let z = self.value(*a).data().to_vec();
                    let acc = acc_slot(&mut grads, *a, g.shape());
                    for r in 0..m {
                        for c in 0..n {
                            let i = r * n + c;
                            acc.data_mut()[i] += y.data()[i] * sigmoid(-z[i]) * (g.data()[i] - dots[c]);
                        }
                    }
                }
                Op::ConvexCols(w, v) => {
                    let (m, n) = self.value(*w).as_matrix();
                    for (a, other) in [(*w, *v), (*v, *w)] {
                        if self.ng(a) {
                            let o = self.value(other).data().to_vec();
                            let acc = acc_slot(&mut grads, a, self.value(a).shape());
                            for r in 0..m {
                                for c in 0..n {
                                    acc.data_mut()[r * n + c] += g.data()[c] * o[r * n + c];
                                }
                            }
                        }
                    }
                }
                Op::SumRows(a) => {
                    let (m, n) = self.value(*a).as_matrix();
                    let acc = acc_slot(&mut grads, *a, self.value(*a).shape());
                    for r in 0..m {
                        for c in 0..n {
                            acc.data_mut()[r * n + c] += g.data()[c];
                        }
                    }
                }
                Op::SumAll(a) => {
                    let s = g.data()[0];
                    let acc = acc_slot(&mut grads, *a, self.value(*a).shape());
                    acc.data_mut().iter_mut().for_each(|x| *x += s);
                }
                Op::Reshape(a) => {
                    let shape = self.value(*a).shape().to_vec();
                    let acc = acc_slot(&mut grads, *a, &shape);
                    for (x, y) in acc.data_mut().iter_mut().zip(g.data()) {
                        *x += y;
                    }
                }
                Op::Conv2d(x, k, b, d) => self.conv2d_backward(&mut grads, &g, *x, *k, *b, d),
                Op::MaxPoolSpatial(a, arg) => {
                    let acc = acc_slot(&mut grads, *a, self.value(*a).shape());
                    for (i, &src) in arg.iter().enumerate() {
                        acc.data_mut()[src] += g.data()[i];
                    }
                }
                Op::Custom(a, local) => {
                    let s = g.data()[0];
                    let acc = acc_slot(&mut grads, *a, local.shape());
                    for (x, y) in acc.data_mut().iter_mut().zip(local.data()) {
                        *x += s * y;
                    }
                }
            }
        }
        result
    }

    fn conv2d_backward(
        &self,
        grads: &mut [Option<Tensor>],
        g: &Tensor,
        x: Var,
        k: Var,
        b: Var,
        d: &ConvDims,
    ) {
        let (oh, ow) = (d.out_h(), d.out_w());
        let gd = g.data();
        if self.ng(b) {
            let acc = acc_slot(grads, b, self.value(b).shape());
            for bi in 0..d.batch {
                for ki in 0..d.kernels {
                    let base = (bi * d.kernels + ki) * oh * ow;
                    acc.data_mut()[ki] += gd[base..base + oh * ow].iter().sum::<f64>();
                }
            }
        }
        if self.ng(k) {
            let xv = self.value(x).data().to_vec();
            let acc = acc_slot(grads, k, self.value(k).shape());
            let kd = acc.data_mut();
            for bi in 0..d.batch {
                let img = &xv[bi * d.h * d.w..(bi + 1) * d.h * d.w];
                for ki in 0..d.kernels {
                    let base = (bi * d.kernels + ki) * oh * ow;
                    for i in 0..oh {
                        for j in 0..ow {
                            let gv = gd[base + i * ow + j];
                            for u in 0..d.kh {
                                for v in 0..d.kw {
                                    kd[ki * d.kh * d.kw + u * d.kw + v] += gv * img[(i + u) * d.w + j + v];
                                }
                            }
                        }
                    }
                }
            }
        }
        if self.ng(x) {
            let kv = self.value(k).data().to_vec();
            let acc = acc_slot(grads, x, self.value(x).shape());
            let xd = acc.data_mut();
            for bi in 0..d.batch {
                for ki in 0..d.kernels {
                    let base = (bi * d.kernels + ki) * oh * ow;
                    for i in 0..oh {
                        for j in 0..ow {
                            let gv = gd[base + i * ow + j];
                            for u in 0..d.kh {
                                for v in 0..d.kw {
                                    xd[bi * d.h * d.w + (i + u) * d.w + j + v] +=
                                        gv * kv[ki * d.kh * d.kw + u * d.kw + v];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn acc_slot<'g>(grads: &'g mut [Option<Tensor>], v: Var, shape: &[usize]) -> &'g mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape))
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn col_sums(t: &Tensor, m: usize, n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n];
    for r in 0..m {
        for (acc, x) in s.iter_mut().zip(&t.data()[r * n..(r + 1) * n]) {
            *acc += x;
        }
    }
    s
}
