//! Recurrent state-space world model.
//!
//! The model state is a deterministic recurrent vector `h` plus a stochastic
//! code `z` of `groups` categoricals with `classes` classes each. Four heads
//! decode `concat(z, h)` into an observation, a distribution over the
//! transition-caption vocabulary, a two-hot reward distribution and a
//! continuation probability.

mod twohot;

use rand::Rng;

pub use twohot::{symexp, symlog, TwoHotSpec};

use crate::diffmath::{
    floored_softmax, kl_rows, Activation, Adam, Dense, GruCell, Mlp, ParameterSet, Tape, Tensor, Var,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct WorldModelConfig {
    pub obs_dim: usize,
    pub embed_dim: usize,
    pub vocab_size: usize,
    pub actions: usize,
    pub groups: usize,
    pub classes: usize,
    /// Width of the recurrent state `h`.
    pub deter: usize,
    /// Width of every dense hidden layer.
    pub hidden: usize,
    pub beta_pred: f64,
    pub beta_reg: f64,
    pub free_nats: f64,
    pub lr: f64,
    pub clip: f64,
    /// Straight-through one-hot samples during training; when false the
    /// posterior probabilities are used directly, which makes the objective
    /// a smooth deterministic function (used for gradient checks).
    pub sample_latents: bool,
}

impl WorldModelConfig {
    pub fn new(obs_dim: usize, embed_dim: usize, vocab_size: usize, actions: usize) -> Self {
        Self {
            obs_dim,
            embed_dim,
            vocab_size,
            actions,
            groups: 8,
            classes: 8,
            deter: 256,
            hidden: 256,
            beta_pred: 0.5,
            beta_reg: 0.1,
            free_nats: 1.0,
            lr: 3e-4,
            clip: 100.0,
            sample_latents: true,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.groups * self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.latent_dim() + self.deter
    }
}

/// A batch of model states, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentState {
    /// `n x deter`.
    pub h: Tensor,
    /// `n x groups*classes`, one-hot per group.
    pub z: Tensor,
}

impl LatentState {
    pub fn zeros(n: usize, cfg: &WorldModelConfig) -> Self {
        Self {
            h: Tensor::zeros(&[n, cfg.deter]),
            z: Tensor::zeros(&[n, cfg.latent_dim()]),
        }
    }

    pub fn rows(&self) -> usize {
        self.h.rows()
    }

    /// `concat(z, h)` per row.
    pub fn features(&self) -> Tensor {
        concat_cols(&self.z, &self.h)
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            h: select_rows(&self.h, rows),
            z: select_rows(&self.z, rows),
        }
    }
}

pub(crate) fn concat_cols(a: &Tensor, b: &Tensor) -> Tensor {
    let (ca, cb) = (a.cols(), b.cols());
    let rows = a.rows();
    let mut data = Vec::with_capacity(rows * (ca + cb));
    for r in 0..rows {
        data.extend_from_slice(a.row_slice(r));
        data.extend_from_slice(b.row_slice(r));
    }
    Tensor::matrix(rows, ca + cb, data)
}

pub(crate) fn select_rows(t: &Tensor, rows: &[usize]) -> Tensor {
    let cols = t.cols();
    let mut data = Vec::with_capacity(rows.len() * cols);
    for &r in rows {
        data.extend_from_slice(t.row_slice(r));
    }
    Tensor::matrix(rows.len(), cols, data)
}

/// Decoder output for one model state.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodedStep {
    pub x_hat: Vec<f64>,
    pub caption_dist: Vec<f64>,
    pub reward_dist: Vec<f64>,
    pub cont: f64,
}

impl DecodedStep {
    pub fn caption_index(&self) -> usize {
        argmax(&self.caption_dist)
    }

    pub fn reward(&self, spec: &TwoHotSpec) -> Result<f64> {
        spec.decode(&self.reward_dist)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Time-major training sequences: index `t` holds `batch` rows.
#[derive(Clone, Debug)]
pub struct SequenceBatch {
    pub batch: usize,
    pub len: usize,
    /// `batch x obs_dim` per step.
    pub obs: Vec<Tensor>,
    /// `batch x embed_dim` transition-caption embeddings per step.
    pub caption_emb: Vec<Tensor>,
    pub caption_index: Vec<Vec<usize>>,
    pub reward: Vec<Vec<f64>>,
    pub cont: Vec<Vec<f64>>,
    /// `batch x actions` one-hot of the action that led into the step (zero
    /// row at episode start).
    pub prev_action: Vec<Tensor>,
}

/// Scalar loss terms of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub obs: f64,
    pub caption: f64,
    pub reward: f64,
    pub cont: f64,
    pub pred: f64,
    pub reg: f64,
    /// Mean per-step KL before the free-nats clamp (identical for both terms).
    pub kl: f64,
}

/// Head outputs on the tape: raw observation prediction and logits.
pub struct HeadVars {
    pub obs: Var,
    pub caption_logits: Var,
    pub reward_logits: Var,
    pub cont_logit: Var,
}

/// Per-row targets for the decoder heads.
pub struct HeadTargets {
    pub obs: Tensor,
    pub caption_onehot: Tensor,
    pub reward_twohot: Tensor,
    /// `n x 1`.
    pub cont: Tensor,
}

pub struct LossVars {
    pub total: Var,
    pub obs: Var,
    pub caption: Var,
    pub reward: Var,
    pub cont: Var,
    pub pred: Var,
    pub reg: Var,
    pub kl_raw: Var,
}

/// `-sum target * log_softmax(logits)` per row.
fn softmax_xent(tape: &mut Tape, logits: Var, target: Var, classes: usize) -> Result<Var> {
    let lp = tape.log_softmax(logits, classes)?;
    let w = tape.mul(target, lp)?;
    let s = tape.row_sum(w);
    Ok(tape.scale(s, -1.0))
}

/// Assembles the full world-model objective from head outputs, targets and
/// the posterior/prior latent distributions of the same rows.
pub fn assemble_loss(
    tape: &mut Tape,
    heads: &HeadVars,
    targets: &HeadTargets,
    post: Var,
    prior: Var,
    cfg: &WorldModelConfig,
) -> Result<LossVars> {
    let x = tape.constant(targets.obs.clone());
    let diff = tape.sub(heads.obs, x)?;
    let sq = tape.square(diff);
    let obs_rows = tape.row_sum(sq);
    let obs = tape.mean(obs_rows);

    let cap_t = tape.constant(targets.caption_onehot.clone());
    let cap_rows = softmax_xent(tape, heads.caption_logits, cap_t, cfg.vocab_size)?;
    let caption = tape.mean(cap_rows);

    let bins = targets.reward_twohot.cols();
    let rew_t = tape.constant(targets.reward_twohot.clone());
    let rew_rows = softmax_xent(tape, heads.reward_logits, rew_t, bins)?;
    let reward = tape.mean(rew_rows);

    // binary cross-entropy from a logit: softplus(l) - c l
    let c = tape.constant(targets.cont.clone());
    let sp = tape.softplus(heads.cont_logit);
    let cl = tape.mul(c, heads.cont_logit)?;
    let bce = tape.sub(sp, cl)?;
    let cont = tape.mean(bce);

    let post_sg = tape.detach(post);
    let prior_sg = tape.detach(prior);
    let kl_pred_rows = kl_rows(tape, post_sg, prior)?;
    let kl_reg_rows = kl_rows(tape, post, prior_sg)?;
    let kl_raw = tape.mean(kl_pred_rows);
    let pred_c = tape.clamp_min(kl_pred_rows, cfg.free_nats);
    let pred = tape.mean(pred_c);
    let reg_c = tape.clamp_min(kl_reg_rows, cfg.free_nats);
    let reg = tape.mean(reg_c);

    let mut total = tape.add(obs, caption)?;
    total = tape.add(total, reward)?;
    total = tape.add(total, cont)?;
    let bp = tape.scale(pred, cfg.beta_pred);
    total = tape.add(total, bp)?;
    let br = tape.scale(reg, cfg.beta_reg);
    total = tape.add(total, br)?;
    Ok(LossVars {
        total,
        obs,
        caption,
        reward,
        cont,
        pred,
        reg,
        kl_raw,
    })
}

#[derive(Clone, Debug)]
pub struct WorldModel {
    cfg: WorldModelConfig,
    twohot: TwoHotSpec,
    params: ParameterSet,
    img_in: Dense,
    gru: GruCell,
    prior: Mlp,
    encoder: Mlp,
    obs_head: Mlp,
    caption_head: Mlp,
    reward_head: Mlp,
    cont_head: Mlp,
    opt: Adam,
}

impl WorldModel {
    pub fn new<R: Rng>(cfg: WorldModelConfig, rng: &mut R) -> Self {
        let mut params = ParameterSet::new();
        let (lat, hid, det) = (cfg.latent_dim(), cfg.hidden, cfg.deter);
        let feat = cfg.feature_dim();
        let twohot = TwoHotSpec::default();
        let img_in = Dense::new(&mut params, "wm.img_in", lat + cfg.actions, hid, Activation::Silu, rng);
        let gru = GruCell::new(&mut params, "wm.gru", hid, det, rng);
        let prior = Mlp::new(&mut params, "wm.prior", &[det, hid, lat], Activation::Linear, rng);
        let encoder = Mlp::new(
            &mut params,
            "wm.encoder",
            &[cfg.obs_dim + cfg.embed_dim + det, hid, lat],
            Activation::Linear,
            rng,
        );
        let obs_head = Mlp::new(&mut params, "wm.obs", &[feat, hid, cfg.obs_dim], Activation::Linear, rng);
        let caption_head = Mlp::new(&mut params, "wm.caption", &[feat, hid, cfg.vocab_size], Activation::Linear, rng);
        let reward_head = Mlp::new(&mut params, "wm.reward", &[feat, hid, twohot.len()], Activation::Linear, rng);
        let cont_head = Mlp::new(&mut params, "wm.cont", &[feat, hid, 1], Activation::Linear, rng);
        // reward predictions start at exactly zero
        let last = reward_head.layers.last().expect("layers").w;
        params.value_mut(last).data_mut().iter_mut().for_each(|w| *w = 0.0);
        let opt = Adam::new(cfg.lr).with_clip(cfg.clip);
        Self {
            cfg,
            twohot,
            params,
            img_in,
            gru,
            prior,
            encoder,
            obs_head,
            caption_head,
            reward_head,
            cont_head,
            opt,
        }
    }

    pub fn config(&self) -> &WorldModelConfig {
        &self.cfg
    }

    pub fn twohot(&self) -> &TwoHotSpec {
        &self.twohot
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    /// `h' = gru(h, img_in(concat(z, a)))`.
    pub fn seq_tape(&self, tape: &mut Tape, z: Var, h: Var, a: Var) -> Result<Var> {
        let za = tape.concat_cols(&[z, a])?;
        let x = self.img_in.forward(tape, &self.params, za)?;
        self.gru.step(tape, &self.params, h, x)
    }

    pub fn prior_tape(&self, tape: &mut Tape, h: Var) -> Result<Var> {
        let logits = self.prior.forward(tape, &self.params, h)?;
        floored_softmax(tape, logits, self.cfg.classes)
    }

    pub fn posterior_tape(&self, tape: &mut Tape, x: Var, u: Var, h: Var) -> Result<Var> {
        let inp = tape.concat_cols(&[x, u, h])?;
        let logits = self.encoder.forward(tape, &self.params, inp)?;
        floored_softmax(tape, logits, self.cfg.classes)
    }

    pub fn heads_tape(&self, tape: &mut Tape, feat: Var) -> Result<HeadVars> {
        Ok(HeadVars {
            obs: self.obs_head.forward(tape, &self.params, feat)?,
            caption_logits: self.caption_head.forward(tape, &self.params, feat)?,
            reward_logits: self.reward_head.forward(tape, &self.params, feat)?,
            cont_logit: self.cont_head.forward(tape, &self.params, feat)?,
        })
    }

    /// One-hot draw per categorical group.
    pub fn sample<R: Rng>(&self, probs: &Tensor, rng: &mut R) -> Tensor {
        sample_groups(probs, self.cfg.classes, rng)
    }

    fn check_rows(&self, what: &'static str, t: &Tensor, cols: usize) -> Result<()> {
        if t.cols() != cols {
            return Err(Error::Shape {
                op: what,
                detail: format!("{} columns, expected {cols}", t.cols()),
            });
        }
        Ok(())
    }

    /// Posterior distribution and a sample from it.
    pub fn encode<R: Rng>(&self, x: &Tensor, u: &Tensor, h: &Tensor, rng: &mut R) -> Result<(Tensor, Tensor)> {
        self.check_rows("encode", x, self.cfg.obs_dim)?;
        self.check_rows("encode", u, self.cfg.embed_dim)?;
        self.check_rows("encode", h, self.cfg.deter)?;
        let mut tape = Tape::new();
        let (xv, uv, hv) = (tape.constant(x.clone()), tape.constant(u.clone()), tape.constant(h.clone()));
        let p = self.posterior_tape(&mut tape, xv, uv, hv)?;
        let probs = tape.value(p).clone();
        let sample = self.sample(&probs, rng);
        Ok((probs, sample))
    }

    /// Prior distribution over the next latent and the next recurrent state.
    pub fn sequence_step(&self, z: &Tensor, h: &Tensor, a: &Tensor) -> Result<(Tensor, Tensor)> {
        self.check_rows("sequence_step", z, self.cfg.latent_dim())?;
        self.check_rows("sequence_step", h, self.cfg.deter)?;
        self.check_rows("sequence_step", a, self.cfg.actions)?;
        let mut tape = Tape::new();
        let (zv, hv, av) = (tape.constant(z.clone()), tape.constant(h.clone()), tape.constant(a.clone()));
        let h2 = self.seq_tape(&mut tape, zv, hv, av)?;
        let prior = self.prior_tape(&mut tape, h2)?;
        Ok((tape.value(prior).clone(), tape.value(h2).clone()))
    }

    /// All four heads for every row of `state`.
    pub fn decode(&self, state: &LatentState) -> Result<Vec<DecodedStep>> {
        let mut tape = Tape::new();
        let f = tape.constant(state.features());
        let heads = self.heads_tape(&mut tape, f)?;
        let cap = tape.softmax(heads.caption_logits, self.cfg.vocab_size)?;
        let rew = tape.softmax(heads.reward_logits, self.twohot.len())?;
        let cont = tape.sigmoid(heads.cont_logit);
        let (x, cap, rew, cont) = (tape.value(heads.obs), tape.value(cap), tape.value(rew), tape.value(cont));
        Ok((0..state.rows())
            .map(|r| DecodedStep {
                x_hat: x.row_slice(r).to_vec(),
                caption_dist: cap.row_slice(r).to_vec(),
                reward_dist: rew.row_slice(r).to_vec(),
                cont: cont.row_slice(r)[0],
            })
            .collect())
    }

    /// Reward, continuation and most likely caption index per row, without
    /// the observation head.
    pub fn predict(&self, feat: &Tensor) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)> {
        let mut tape = Tape::new();
        let f = tape.constant(feat.clone());
        let rl = self.reward_head.forward(&mut tape, &self.params, f)?;
        let rew = tape.softmax(rl, self.twohot.len())?;
        let cl = self.cont_head.forward(&mut tape, &self.params, f)?;
        let cont = tape.sigmoid(cl);
        let ul = self.caption_head.forward(&mut tape, &self.params, f)?;
        let rew = tape.value(rew);
        let rows = feat.rows();
        let mut rewards = Vec::with_capacity(rows);
        for r in 0..rows {
            rewards.push(self.twohot.decode(rew.row_slice(r))?);
        }
        let conts = tape.value(cont).data().to_vec();
        let ul = tape.value(ul);
        let captions = (0..rows).map(|r| argmax(ul.row_slice(r))).collect();
        Ok((rewards, conts, captions))
    }

    /// Filtering step used while acting: advance with the previous action,
    /// then condition on the new observation and caption embedding.
    pub fn observe<R: Rng>(
        &self,
        state: &LatentState,
        prev_action: &Tensor,
        x: &Tensor,
        u: &Tensor,
        rng: &mut R,
    ) -> Result<LatentState> {
        let (_, h) = self.sequence_step(&state.z, &state.h, prev_action)?;
        let (_, z) = self.encode(x, u, &h, rng)?;
        Ok(LatentState { h, z })
    }

    /// Records the whole objective for `batch` on `tape`. Returns the loss
    /// variables and the posterior states of every position, rows ordered
    /// `t * batch + b`.
    pub fn loss_tape<R: Rng>(
        &self,
        tape: &mut Tape,
        batch: &SequenceBatch,
        rng: &mut R,
    ) -> Result<(LossVars, LatentState)> {
        let (b, l) = (batch.batch, batch.len);
        if l == 0 || b == 0 || batch.obs.len() != l {
            return Err(Error::Shape {
                op: "world_model_loss",
                detail: format!("batch {b} x {l} with {} steps of data", batch.obs.len()),
            });
        }
        let mut h = tape.constant(Tensor::zeros(&[b, self.cfg.deter]));
        let mut z = tape.constant(Tensor::zeros(&[b, self.cfg.latent_dim()]));
        let mut feats = Vec::with_capacity(l);
        let mut posts = Vec::with_capacity(l);
        let mut priors = Vec::with_capacity(l);
        let mut hs = Vec::with_capacity(l * b * self.cfg.deter);
        let mut zs = Vec::with_capacity(l * b * self.cfg.latent_dim());
        for t in 0..l {
            let a = tape.constant(batch.prev_action[t].clone());
            h = self.seq_tape(tape, z, h, a)?;
            let prior = self.prior_tape(tape, h)?;
            let x = tape.constant(batch.obs[t].clone());
            let u = tape.constant(batch.caption_emb[t].clone());
            let post = self.posterior_tape(tape, x, u, h)?;
            hs.extend_from_slice(tape.value(h).data());
            z = if self.cfg.sample_latents {
                let sample = self.sample(tape.value(post), rng);
                tape.straight_through(post, sample)?
            } else {
                post
            };
            zs.extend_from_slice(tape.value(z).data());
            feats.push(tape.concat_cols(&[z, h])?);
            posts.push(post);
            priors.push(prior);
        }
        let feat = tape.concat_rows(&feats)?;
        let post = tape.concat_rows(&posts)?;
        let prior = tape.concat_rows(&priors)?;
        let heads = self.heads_tape(tape, feat)?;
        let n = b * l;
        let mut obs = Vec::with_capacity(n * self.cfg.obs_dim);
        let mut cap = vec![0.0; n * self.cfg.vocab_size];
        let bins = self.twohot.len();
        let mut rew = vec![0.0; n * bins];
        let mut cont = Vec::with_capacity(n);
        for t in 0..l {
            obs.extend_from_slice(batch.obs[t].data());
            for i in 0..b {
                let row = t * b + i;
                cap[row * self.cfg.vocab_size + batch.caption_index[t][i]] = 1.0;
                self.twohot
                    .encode_into(batch.reward[t][i], &mut rew[row * bins..(row + 1) * bins])?;
                cont.push(batch.cont[t][i]);
            }
        }
        let targets = HeadTargets {
            obs: Tensor::matrix(n, self.cfg.obs_dim, obs),
            caption_onehot: Tensor::matrix(n, self.cfg.vocab_size, cap),
            reward_twohot: Tensor::matrix(n, bins, rew),
            cont: Tensor::matrix(n, 1, cont),
        };
        let vars = assemble_loss(tape, &heads, &targets, post, prior, &self.cfg)?;
        let states = LatentState {
            h: Tensor::matrix(n, self.cfg.deter, hs),
            z: Tensor::matrix(n, self.cfg.latent_dim(), zs),
        };
        Ok((vars, states))
    }

    /// Loss value and breakdown without updating parameters.
    pub fn loss<R: Rng>(&self, batch: &SequenceBatch, rng: &mut R) -> Result<(LossBreakdown, LatentState)> {
        let mut tape = Tape::new();
        let (vars, states) = self.loss_tape(&mut tape, batch, rng)?;
        Ok((breakdown(&tape, &vars), states))
    }

    /// One optimizer step on the full objective.
    pub fn train<R: Rng>(&mut self, batch: &SequenceBatch, rng: &mut R) -> Result<(LossBreakdown, LatentState)> {
        let mut tape = Tape::new();
        let (vars, states) = self.loss_tape(&mut tape, batch, rng)?;
        let out = breakdown(&tape, &vars);
        let grads = tape.backward(vars.total)?;
        grads.accumulate_into(&tape, &mut self.params);
        self.opt.step(&mut self.params)?;
        Ok((out, states))
    }
}

pub fn breakdown(tape: &Tape, v: &LossVars) -> LossBreakdown {
    let g = |x: Var| tape.value(x).item();
    LossBreakdown {
        total: g(v.total),
        obs: g(v.obs),
        caption: g(v.caption),
        reward: g(v.reward),
        cont: g(v.cont),
        pred: g(v.pred),
        reg: g(v.reg),
        kl: g(v.kl_raw),
    }
}

/// One-hot draw per group of `classes` columns.
pub fn sample_groups<R: Rng>(probs: &Tensor, classes: usize, rng: &mut R) -> Tensor {
    let mut out = vec![0.0; probs.len()];
    for (p, o) in probs.data().chunks(classes).zip(out.chunks_mut(classes)) {
        let r: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = classes - 1;
        for (j, &pj) in p.iter().enumerate() {
            acc += pj;
            if r < acc {
                pick = j;
                break;
            }
        }
        o[pick] = 1.0;
    }
    Tensor::new(probs.shape().to_vec(), out).expect("same shape")
}

#[cfg(test)]
mod tests;
