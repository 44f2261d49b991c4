use rand::Rng;

use crate::diffmath::{Activation, Adam, Mlp, ParameterSet, Tape, Tensor};
use crate::error::{Error, Result};
use crate::textembed::SentenceEmbedding;

/// Lower bound on the running standard deviation once two samples are in.
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct RndConfig {
    pub hidden: usize,
    pub layers: usize,
    pub out_dim: usize,
    pub lr: f64,
}

impl Default for RndConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            layers: 2,
            out_dim: 32,
            lr: 3e-4,
        }
    }
}

/// Frozen random target network and a trainable predictor of the same shape.
#[derive(Clone, Debug)]
pub struct RndPair {
    target: Mlp,
    target_params: ParameterSet,
    predictor: Mlp,
    predictor_params: ParameterSet,
    opt: Adam,
    in_dim: usize,
    out_dim: usize,
}

impl RndPair {
    pub fn new<R: Rng>(in_dim: usize, cfg: &RndConfig, rng: &mut R) -> Self {
        let mut widths = vec![in_dim];
        widths.extend(std::iter::repeat(cfg.hidden).take(cfg.layers));
        widths.push(cfg.out_dim);
        let mut target_params = ParameterSet::new();
        let target = Mlp::new(&mut target_params, "rnd.target", &widths, Activation::Linear, rng);
        let mut predictor_params = ParameterSet::new();
        let predictor = Mlp::new(&mut predictor_params, "rnd.predictor", &widths, Activation::Linear, rng);
        Self {
            target,
            target_params,
            predictor,
            predictor_params,
            opt: Adam::new(cfg.lr),
            in_dim,
            out_dim: cfg.out_dim,
        }
    }

    /// Predictor starts as an exact copy of the target.
    pub fn with_copied_predictor(mut self) -> Self {
        self.predictor_params.copy_values_from(&self.target_params);
        self
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn target_params(&self) -> &ParameterSet {
        &self.target_params
    }

    pub fn predictor_params(&self) -> &ParameterSet {
        &self.predictor_params
    }

    pub(crate) fn target_params_mut(&mut self) -> &mut ParameterSet {
        &mut self.target_params
    }

    pub fn predictor_params_mut(&mut self) -> &mut ParameterSet {
        &mut self.predictor_params
    }

    fn input(&self, goals: &[&[f64]]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(goals.len() * self.in_dim);
        for g in goals {
            if g.len() != self.in_dim {
                return Err(Error::Dimension(g.len(), self.in_dim));
            }
            data.extend_from_slice(g);
        }
        Ok(Tensor::matrix(goals.len(), self.in_dim, data))
    }

    /// Per-row squared prediction error on `tape`; returns the `n x 1` var.
    fn error_rows(&self, tape: &mut Tape, x: Tensor) -> Result<crate::diffmath::Var> {
        let x = tape.constant(x);
        let t = self.target.forward(tape, &self.target_params, x)?;
        let t = tape.detach(t);
        let p = self.predictor.forward(tape, &self.predictor_params, x)?;
        let d = tape.sub(p, t)?;
        let sq = tape.square(d);
        Ok(tape.row_sum(sq))
    }

    /// Prediction errors for a batch of embeddings.
    pub fn errors(&self, goals: &[&[f64]]) -> Result<Vec<f64>> {
        if goals.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let e = self.error_rows(&mut tape, self.input(goals)?)?;
        Ok(tape.value(e).data().to_vec())
    }

    /// One optimizer step on the weighted mean error. Returns the errors
    /// measured before the step.
    pub fn update_weighted(&mut self, goals: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
        if goals.is_empty() {
            return Err(Error::NotEnoughData { have: 0, need: 1 });
        }
        if weights.len() != goals.len() {
            return Err(Error::Length(format!("{} goals, {} weights", goals.len(), weights.len())));
        }
        let total: f64 = weights.iter().sum();
        let mut tape = Tape::new();
        let e = self.error_rows(&mut tape, self.input(goals)?)?;
        let w = tape.constant(Tensor::matrix(
            goals.len(),
            1,
            weights.iter().map(|w| w / total).collect(),
        ));
        let weighted = tape.mul(e, w)?;
        let loss = tape.sum(weighted);
        let errors = tape.value(e).data().to_vec();
        let grads = tape.backward(loss)?;
        grads.accumulate_into(&tape, &mut self.predictor_params);
        self.opt.step(&mut self.predictor_params)?;
        Ok(errors)
    }
}

/// `||f_hat(g) - f(g)||^2`.
pub fn rnd_error(g: &SentenceEmbedding, pair: &RndPair) -> Result<f64> {
    Ok(pair.errors(&[g.vector()])?[0])
}

/// Streaming mean and standard deviation (Welford).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation, floored; zero before two samples.
    pub fn std(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count - 1) as f64).sqrt().max(SIGMA_FLOOR)
    }
}

/// `(e - m) / sigma`; values pass through unchanged until the statistics
/// hold two samples. `clamp_at_zero` cuts negative magnitudes.
pub fn normalize(errors: &[f64], stats: &RunningStats, clamp_at_zero: bool) -> Vec<f64> {
    errors
        .iter()
        .map(|&e| {
            let i = if stats.count() < 2 {
                e
            } else {
                (e - stats.mean()) / stats.std()
            };
            if clamp_at_zero {
                i.max(0.0)
            } else {
                i
            }
        })
        .collect()
}

/// One predictor step on the batch mean error, then folds the batch mean
/// into the running statistics. Returns the pre-step errors.
pub fn rnd_update(goals: &[SentenceEmbedding], pair: &mut RndPair, stats: &mut RunningStats) -> Result<Vec<f64>> {
    let rows: Vec<&[f64]> = goals.iter().map(|g| g.vector()).collect();
    let weights = vec![1.0; rows.len()];
    let errors = pair.update_weighted(&rows, &weights)?;
    stats.push(errors.iter().sum::<f64>() / errors.len() as f64);
    Ok(errors)
}
