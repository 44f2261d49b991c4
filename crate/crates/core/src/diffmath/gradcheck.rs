//! Central finite-difference comparison of tape gradients.

use super::params::{ParamId, ParameterSet};
use super::tape::{Tape, Var};
use crate::error::Result;

/// Outcome of a gradient check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Compares the backward pass of `f` against central differences on up to
/// `per_param` evenly spaced entries of every parameter reachable through
/// `params_of`. `f` must be a deterministic function of the parameter
/// values. Denominators are floored at `floor` so that near-zero gradients
/// are compared absolutely.
pub fn gradient_check<M, F>(
    model: &mut M,
    params_of: fn(&mut M) -> &mut ParameterSet,
    mut f: F,
    eps: f64,
    per_param: usize,
    floor: f64,
) -> Result<GradCheck>
where
    F: FnMut(&mut Tape, &M) -> Result<Var>,
{
    params_of(model).zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, model)?;
    let grads = tape.backward(loss)?;
    grads.accumulate_into(&tape, params_of(model));
    let ids: Vec<ParamId> = params_of(model).ids().collect();
    let mut eval = |model: &M| -> Result<f64> {
        let mut tape = Tape::new();
        let l = f(&mut tape, model)?;
        Ok(tape.value(l).item())
    };
    let mut out = GradCheck {
        max_rel_err: 0.0,
        checked: 0,
    };
    for id in ids {
        let n = params_of(model).value(id).len();
        let stride = (n / per_param.max(1)).max(1);
        for idx in (0..n).step_by(stride).take(per_param) {
            let analytic = params_of(model).grad(id)[idx];
            let orig = params_of(model).value(id).data()[idx];
            params_of(model).value_mut(id).data_mut()[idx] = orig + eps;
            let lp = eval(model)?;
            params_of(model).value_mut(id).data_mut()[idx] = orig - eps;
            let lm = eval(model)?;
            params_of(model).value_mut(id).data_mut()[idx] = orig;
            let numeric = (lp - lm) / (2.0 * eps);
            let denom = analytic.abs().max(numeric.abs()).max(floor);
            out.max_rel_err = out.max_rel_err.max((analytic - numeric).abs() / denom);
            out.checked += 1;
        }
    }
    params_of(model).zero_grad();
    Ok(out)
}

/// `params_of` for a bare parameter set.
pub fn identity(p: &mut ParameterSet) -> &mut ParameterSet {
    p
}
