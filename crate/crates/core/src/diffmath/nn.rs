//! Layers built from tape primitives.

use rand::Rng;

use super::params::{ParamId, ParameterSet};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Probability floor mixed into every categorical before logs and KLs.
pub const PROB_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Silu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Linear => x,
            Activation::Silu => tape.silu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// Fully connected layer `act(x W + b)`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
    pub act: Activation,
}

impl Dense {
    pub fn new<R: Rng>(
        params: &mut ParameterSet,
        name: &str,
        input: usize,
        output: usize,
        act: Activation,
        rng: &mut R,
    ) -> Self {
        let w = params.add_uniform(format!("{name}.w"), input, output, rng);
        let b = params.add(format!("{name}.b"), Tensor::zeros(&[output]));
        Self {
            w,
            b,
            input,
            output,
            act,
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParameterSet, x: Var) -> Result<Var> {
        let cols = tape.value(x).cols();
        if cols != self.input {
            return Err(Error::Shape {
                op: "dense",
                detail: format!("input width {cols}, layer expects {}", self.input),
            });
        }
        let w = tape.param(params, self.w);
        let b = tape.param(params, self.b);
        let y = tape.affine(x, w, b)?;
        Ok(self.act.apply(tape, y))
    }
}

/// Stack of dense layers: SiLU hidden layers and a configurable output.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `widths` lists input, hidden..., output.
    pub fn new<R: Rng>(
        params: &mut ParameterSet,
        name: &str,
        widths: &[usize],
        out_act: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(widths.len() >= 2, "mlp needs input and output widths");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { out_act } else { Activation::Silu };
                Dense::new(params, &format!("{name}.{i}"), widths[i], widths[i + 1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParameterSet, x: Var) -> Result<Var> {
        self.layers
            .iter()
            .try_fold(x, |h, layer| layer.forward(tape, params, h))
    }

    pub fn input(&self) -> usize {
        self.layers[0].input
    }

    pub fn output(&self) -> usize {
        self.layers.last().expect("non-empty").output
    }
}

/// Gated recurrent cell:
///
/// ```text
/// r  = sigmoid(x Wxr + bxr + h Whr + bhr)
/// u  = sigmoid(x Wxu + bxu + h Whu + bhu)
/// n  = tanh(x Wxn + bxn + r * (h Whn + bhn))
/// h' = (1 - u) * n + u * h
/// ```
///
/// Gate blocks are laid out `[reset | update | candidate]` along the columns.
#[derive(Clone, Debug)]
pub struct GruCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub bx: ParamId,
    pub bh: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<R: Rng>(
        params: &mut ParameterSet,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let wx = params.add_uniform(format!("{name}.wx"), input, 3 * hidden, rng);
        let wh = params.add_uniform(format!("{name}.wh"), hidden, 3 * hidden, rng);
        let bx = params.add(format!("{name}.bx"), Tensor::zeros(&[3 * hidden]));
        let bh = params.add(format!("{name}.bh"), Tensor::zeros(&[3 * hidden]));
        Self {
            wx,
            wh,
            bx,
            bh,
            input,
            hidden,
        }
    }

    pub fn step(&self, tape: &mut Tape, params: &ParameterSet, h: Var, x: Var) -> Result<Var> {
        let (hc, xc) = (tape.value(h).cols(), tape.value(x).cols());
        if hc != self.hidden || xc != self.input {
            return Err(Error::Shape {
                op: "gru",
                detail: format!(
                    "h width {hc} (want {}), x width {xc} (want {})",
                    self.hidden, self.input
                ),
            });
        }
        let hs = self.hidden;
        let (wx, wh) = (tape.param(params, self.wx), tape.param(params, self.wh));
        let (bx, bh) = (tape.param(params, self.bx), tape.param(params, self.bh));
        let gx = tape.affine(x, wx, bx)?;
        let gh = tape.affine(h, wh, bh)?;
        let xr = tape.slice_cols(gx, 0, hs)?;
        let xu = tape.slice_cols(gx, hs, 2 * hs)?;
        let xn = tape.slice_cols(gx, 2 * hs, 3 * hs)?;
        let hr = tape.slice_cols(gh, 0, hs)?;
        let hu = tape.slice_cols(gh, hs, 2 * hs)?;
        let hn = tape.slice_cols(gh, 2 * hs, 3 * hs)?;
        let r_pre = tape.add(xr, hr)?;
        let r = tape.sigmoid(r_pre);
        let u_pre = tape.add(xu, hu)?;
        let u = tape.sigmoid(u_pre);
        let gated = tape.mul(r, hn)?;
        let n_pre = tape.add(xn, gated)?;
        let n = tape.tanh(n_pre);
        let keep = tape.one_minus(u);
        let a = tape.mul(keep, n)?;
        let b = tape.mul(u, h)?;
        tape.add(a, b)
    }
}

/// Softmax per group of `classes`, mixed with a uniform floor so every
/// entry is at least [`PROB_FLOOR`]: `p = (1 - C eps) softmax + eps`.
pub fn floored_softmax(tape: &mut Tape, logits: Var, classes: usize) -> Result<Var> {
    let p = tape.softmax(logits, classes)?;
    let mixed = tape.scale(p, 1.0 - classes as f64 * PROB_FLOOR);
    Ok(tape.add_scalar(mixed, PROB_FLOOR))
}

/// Per-row `sum p (log p - log q)` over all groups and classes.
pub fn kl_rows(tape: &mut Tape, p: Var, q: Var) -> Result<Var> {
    let lp = tape.log(p);
    let lq = tape.log(q);
    let d = tape.sub(lp, lq)?;
    let w = tape.mul(p, d)?;
    Ok(tape.row_sum(w))
}

/// Per-row cross-entropy `-sum target log p`.
pub fn cross_entropy_rows(tape: &mut Tape, target: Var, p: Var) -> Result<Var> {
    let lp = tape.log(p);
    let w = tape.mul(target, lp)?;
    let s = tape.row_sum(w);
    Ok(tape.scale(s, -1.0))
}

fn check_normalized(t: &Tensor, classes: usize) -> Result<()> {
    for (group, g) in t.data().chunks(classes).enumerate() {
        let sum: f64 = g.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || g.iter().any(|&x| x < 0.0) {
            return Err(Error::NotNormalized { group, sum });
        }
    }
    Ok(())
}

/// KL divergence between two grouped categoricals, summed over groups.
/// Entries are floored at [`PROB_FLOOR`] before taking logs.
pub fn categorical_kl(p: &Tensor, q: &Tensor, classes: usize) -> Result<f64> {
    if p.len() != q.len() || classes == 0 || p.len() % classes != 0 {
        return Err(Error::Shape {
            op: "categorical_kl",
            detail: format!("{:?} vs {:?} ({classes} classes)", p.shape(), q.shape()),
        });
    }
    check_normalized(p, classes)?;
    check_normalized(q, classes)?;
    Ok(p.data()
        .iter()
        .zip(q.data())
        .map(|(&a, &b)| {
            let a = a.max(PROB_FLOOR);
            let b = b.max(PROB_FLOOR);
            a * (a.ln() - b.ln())
        })
        .sum::<f64>()
        .max(0.0))
}
