//! Wengert-list reverse-mode autodiff over [`Tensor`] values.
//!
//! Ops are appended in evaluation order, so the node list is already
//! topologically sorted and `backward` is a single reverse sweep.

use std::collections::HashMap;

use super::params::{ParamId, ParameterSet};
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Silu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Softplus(Var),
    Square(Var),
    Softmax(Var, usize),
    LogSoftmax(Var, usize),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    ConcatRows(Vec<Var>),
    Sum(Var),
    RowSum(Var),
    ClampMin(Var, f64),
    StraightThrough(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_nodes: HashMap<(u64, usize), Var>,
}

/// Result of a backward sweep: one optional gradient buffer per node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds every parameter-leaf gradient that belongs to `params` into its
    /// accumulator. Parameters that appear on the tape but receive no flow
    /// are still marked as having (zero) gradients.
    pub fn accumulate_into(&self, tape: &Tape, params: &mut ParameterSet) {
        for (&(set, index), &var) in &tape.param_nodes {
            if set != params.id() {
                continue;
            }
            let p = params.param_mut(ParamId(index));
            if let Some(g) = self.get(var) {
                for (acc, v) in p.grad.iter_mut().zip(g) {
                    *acc += v;
                }
            }
            p.has_grad = true;
        }
    }
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Untracked input; gradients never flow past it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Stop-gradient: a constant copy of `v`'s current value.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    /// Parameter leaf. Repeated calls for the same parameter return the same
    /// node so its gradient is accumulated once.
    pub fn param(&mut self, params: &ParameterSet, id: ParamId) -> Var {
        let key = (params.id(), id.0);
        if let Some(&v) = self.param_nodes.get(&key) {
            return v;
        }
        let value = params.value(id).clone();
        let v = self.push(value, Op::Param);
        self.param_nodes.insert(key, v);
        v
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let src = self.value(a);
        let data = src.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        self.push(value, op)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if self.value(a).len() != self.value(b).len() || self.value(a).cols() != self.value(b).cols() {
            return Err(shape_err(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        self.push(value, op)
    }

    /// `[m x k] * [k x n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (m, k) = (va.rows(), va.cols());
        if vb.shape().len() != 2 || vb.shape()[0] != k {
            return Err(shape_err(
                "matmul",
                format!("{:?} x {:?}", va.shape(), vb.shape()),
            ));
        }
        let n = vb.cols();
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, va.data(), false, vb.data(), false, 0.0, &mut out);
        Ok(self.push(Tensor::matrix(m, n, out), Op::MatMul(a, b)))
    }

    /// Adds a bias row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(bias));
        let n = va.cols();
        if vb.len() != n {
            return Err(shape_err(
                "add_row",
                format!("{:?} + {:?}", va.shape(), vb.shape()),
            ));
        }
        let mut data = va.data().to_vec();
        for row in data.chunks_mut(n) {
            for (x, b) in row.iter_mut().zip(vb.data()) {
                *x += b;
            }
        }
        let value = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        Ok(self.push(value, Op::AddRow(a, bias)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.binary(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.binary(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.binary(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a))
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let neg = self.scale(a, -1.0);
        self.add_scalar(neg, 1.0)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * sigmoid(x), Op::Silu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Log(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    fn check_groups(&self, op: &'static str, a: Var, classes: usize) -> Result<()> {
        let cols = self.value(a).cols();
        if classes == 0 || cols % classes != 0 {
            return Err(shape_err(op, format!("{cols} columns, {classes} classes")));
        }
        Ok(())
    }

    /// Softmax over consecutive groups of `classes` columns.
    pub fn softmax(&mut self, a: Var, classes: usize) -> Result<Var> {
        self.check_groups("softmax", a, classes)?;
        let src = self.value(a);
        let mut data = src.data().to_vec();
        for g in data.chunks_mut(classes) {
            let max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in g.iter_mut() {
                *x = (*x - max).exp();
                z += *x;
            }
            for x in g.iter_mut() {
                *x /= z;
            }
        }
        let value = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        Ok(self.push(value, Op::Softmax(a, classes)))
    }

    pub fn log_softmax(&mut self, a: Var, classes: usize) -> Result<Var> {
        self.check_groups("log_softmax", a, classes)?;
        let src = self.value(a);
        let mut data = src.data().to_vec();
        for g in data.chunks_mut(classes) {
            let max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + g.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            for x in g.iter_mut() {
                *x -= lse;
            }
        }
        let value = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        Ok(self.push(value, Op::LogSoftmax(a, classes)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(shape_err("concat_cols", "row counts differ".into()));
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        Ok(self.push(Tensor::matrix(rows, total, data), Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let src = self.value(a);
        if start >= end || end > src.cols() {
            return Err(shape_err(
                "slice_cols",
                format!("[{start}, {end}) of {} columns", src.cols()),
            ));
        }
        let rows = src.rows();
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&src.row_slice(r)[start..end]);
        }
        Ok(self.push(
            Tensor::matrix(rows, end - start, data),
            Op::SliceCols(a, start, end),
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.value(parts[0]).cols();
        if parts.iter().any(|&p| self.value(p).cols() != cols) {
            return Err(shape_err("concat_rows", "column counts differ".into()));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let rows = data.len() / cols;
        Ok(self.push(Tensor::matrix(rows, cols, data), Op::ConcatRows(parts.to_vec())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Per-row sum: `[rows x cols] -> [rows x 1]`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let rows = src.rows();
        let data = (0..rows).map(|r| src.row_slice(r).iter().sum()).collect();
        self.push(Tensor::matrix(rows, 1, data), Op::RowSum(a))
    }

    /// `max(lo, a)` elementwise; gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, a: Var, lo: f64) -> Var {
        self.unary(a, |x| x.max(lo), Op::ClampMin(a, lo))
    }

    /// Straight-through estimator: the forward value is `sample` exactly,
    /// the backward pass routes gradients to `probs` unchanged.
    pub fn straight_through(&mut self, probs: Var, sample: Tensor) -> Result<Var> {
        let p = self.value(probs);
        if p.len() != sample.len() {
            return Err(shape_err(
                "straight_through",
                format!("{:?} vs {:?}", p.shape(), sample.shape()),
            ));
        }
        let value = Tensor::new(p.shape().to_vec(), sample.into_data()).expect("same shape");
        Ok(self.push(value, Op::StraightThrough(probs)))
    }

    /// Dense affine map `x W + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_row(y, b)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        if !lv.is_finite() {
            return Err(Error::NonFinite("backward (loss)"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
            match &mut grads[v.0] {
                Some(buf) => {
                    for (b, x) in buf.iter_mut().zip(g) {
                        *b += x;
                    }
                }
                slot @ None => *slot = Some(g.to_vec()),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("backward"));
            }
            let node = &self.nodes[idx];
            let out = &node.value;
            match &node.op {
                Op::Constant | Op::Param => {}
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, &g, false, vb.data(), true, 0.0, &mut ga);
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, va.data(), true, &g, false, 0.0, &mut gb);
                    acc(&mut grads, *a, &ga);
                    acc(&mut grads, *b, &gb);
                }
                Op::AddRow(a, b) => {
                    let n = out.cols();
                    let mut gb = vec![0.0; n];
                    for row in g.chunks(n) {
                        for (s, x) in gb.iter_mut().zip(row) {
                            *s += x;
                        }
                    }
                    acc(&mut grads, *a, &g);
                    acc(&mut grads, *b, &gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, &g);
                    acc(&mut grads, *b, &g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    acc(&mut grads, *b, &neg);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                    let ga: Vec<f64> = g.iter().zip(vb).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(va).map(|(x, y)| x * y).collect();
                    acc(&mut grads, *a, &ga);
                    acc(&mut grads, *b, &gb);
                }
                Op::Scale(a, c) => {
                    let ga: Vec<f64> = g.iter().map(|x| x * c).collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::AddScalar(a) | Op::StraightThrough(a) => acc(&mut grads, *a, &g),
                Op::Silu(a) => {
                    let va = self.value(*a).data();
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(va)
                        .map(|(gy, &x)| {
                            let s = sigmoid(x);
                            gy * (s + x * s * (1.0 - s))
                        })
                        .collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::Tanh(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(out.data())
                        .map(|(gy, y)| gy * (1.0 - y * y))
                        .collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::Sigmoid(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(out.data())
                        .map(|(gy, y)| gy * y * (1.0 - y))
                        .collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::Exp(a) => {
                    let ga: Vec<f64> = g.iter().zip(out.data()).map(|(gy, y)| gy * y).collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::Log(a) => {
                    let va = self.value(*a).data();
                    let ga: Vec<f64> = g.iter().zip(va).map(|(gy, x)| gy / x).collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::Softplus(a) => {
                    let va = self.value(*a).data();
                    let ga: Vec<f64> = g.iter().zip(va).map(|(gy, &x)| gy * sigmoid(x)).collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::Square(a) => {
                    let va = self.value(*a).data();
                    let ga: Vec<f64> = g.iter().zip(va).map(|(gy, x)| 2.0 * gy * x).collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::Softmax(a, classes) => {
                    let mut ga = vec![0.0; g.len()];
                    for ((gg, yy), out_g) in g
                        .chunks(*classes)
                        .zip(out.data().chunks(*classes))
                        .zip(ga.chunks_mut(*classes))
                    {
                        let dot: f64 = gg.iter().zip(yy).map(|(x, y)| x * y).sum();
                        for ((o, x), y) in out_g.iter_mut().zip(gg).zip(yy) {
                            *o = y * (x - dot);
                        }
                    }
                    acc(&mut grads, *a, &ga);
                }
                Op::LogSoftmax(a, classes) => {
                    let mut ga = vec![0.0; g.len()];
                    for ((gg, ly), out_g) in g
                        .chunks(*classes)
                        .zip(out.data().chunks(*classes))
                        .zip(ga.chunks_mut(*classes))
                    {
                        let total: f64 = gg.iter().sum();
                        for ((o, x), l) in out_g.iter_mut().zip(gg).zip(ly) {
                            *o = x - l.exp() * total;
                        }
                    }
                    acc(&mut grads, *a, &ga);
                }
                Op::ConcatCols(parts) => {
                    let rows = out.rows();
                    let total = out.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let c = self.value(p).cols();
                        let mut gp = Vec::with_capacity(rows * c);
                        for r in 0..rows {
                            gp.extend_from_slice(&g[r * total + offset..r * total + offset + c]);
                        }
                        acc(&mut grads, p, &gp);
                        offset += c;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let src = self.value(*a);
                    let (rows, cols) = (src.rows(), src.cols());
                    let w = end - start;
                    let mut ga = vec![0.0; rows * cols];
                    for r in 0..rows {
                        ga[r * cols + start..r * cols + end].copy_from_slice(&g[r * w..(r + 1) * w]);
                    }
                    acc(&mut grads, *a, &ga);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        acc(&mut grads, p, &g[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::Sum(a) => {
                    let ga = vec![g[0]; self.value(*a).len()];
                    acc(&mut grads, *a, &ga);
                }
                Op::RowSum(a) => {
                    let src = self.value(*a);
                    let cols = src.cols();
                    let ga: Vec<f64> = (0..src.len()).map(|i| g[i / cols]).collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::ClampMin(a, lo) => {
                    let va = self.value(*a).data();
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(va)
                        .map(|(gy, x)| if x > lo { *gy } else { 0.0 })
                        .collect();
                    acc(&mut grads, *a, &ga);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::scalar(3.0));
        let mut ps = ParameterSet::new();
        let px = ps.add("x", Tensor::scalar(3.0));
        let xv = t.param(&ps, px);
        let y = t.mul(xv, xv).unwrap();
        let loss = t.sum(y);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(xv).unwrap(), &[6.0]);
        // unrelated constant receives nothing
        assert!(g.get(x).is_none());
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let mut ps = ParameterSet::new();
        let px = ps.add("x", Tensor::scalar(3.0));
        let mut t = Tape::new();
        let xv = t.param(&ps, px);
        let zero = t.scale(xv, 0.0);
        let c = t.add_scalar(zero, 5.0);
        let loss = t.sum(c);
        let g = t.backward(loss).unwrap();
        g.accumulate_into(&t, &mut ps);
        assert_eq!(ps.grad(px), &[0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::row(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn nan_loss_rejected() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::scalar(-1.0));
        let y = t.log(x);
        let s = t.sum(y);
        assert!(matches!(t.backward(s), Err(Error::NonFinite(_))));
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut ps = ParameterSet::new();
        let px = ps.add("x", Tensor::scalar(2.0));
        let mut t = Tape::new();
        let xv = t.param(&ps, px);
        let y = t.square(xv);
        let loss = t.sum(y);
        for _ in 0..2 {
            t.backward(loss).unwrap().accumulate_into(&t, &mut ps);
        }
        assert_eq!(ps.grad(px), &[8.0]);
    }

    #[test]
    fn straight_through_value_is_exact_sample() {
        let mut t = Tape::new();
        let p = t.constant(Tensor::row(vec![0.3, 0.7]));
        let s = t.straight_through(p, Tensor::row(vec![0.0, 1.0])).unwrap();
        assert_eq!(t.value(s).data(), &[0.0, 1.0]);
    }

    #[test]
    fn clamp_min_blocks_gradient_below_floor() {
        let mut ps = ParameterSet::new();
        let px = ps.add("x", Tensor::row(vec![0.5, 2.0]));
        let mut t = Tape::new();
        let xv = t.param(&ps, px);
        let c = t.clamp_min(xv, 1.0);
        let loss = t.sum(c);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(xv).unwrap(), &[0.0, 1.0]);
        assert_eq!(t.value(c).data(), &[1.0, 2.0]);
    }
}
