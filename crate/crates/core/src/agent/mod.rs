//! Actor-critic trained on imagined rollouts of the world model.

mod returns;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use returns::{lambda_returns, percentile, ReturnNormalizer};

use crate::diffmath::{Activation, Adam, Mlp, ParameterSet, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::reward_engine::intrinsic_from_cosines;
use crate::worldmodel::{concat_cols, LatentState, TwoHotSpec, WorldModel};

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// Entropy coefficient.
    pub eta: f64,
    pub normalizer_decay: f64,
    pub hidden: usize,
    pub layers: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub clip: f64,
    /// Imagination horizon.
    pub horizon: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.997,
            lambda: 0.95,
            eta: 3e-4,
            normalizer_decay: 0.99,
            hidden: 256,
            layers: 2,
            actor_lr: 3e-5,
            critic_lr: 3e-5,
            clip: 100.0,
            horizon: 15,
        }
    }
}

/// Goal information shared by the rollouts that start from positions with
/// the same goal set: cosine of every vocabulary caption against each goal,
/// and the per-goal novelty magnitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalTable {
    /// `vocab x K`.
    pub cosines: Vec<Vec<f64>>,
    pub magnitudes: Vec<f64>,
}

/// How imagined captions are turned into intrinsic rewards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntrinsicSpec {
    pub alpha: f64,
    pub threshold: f64,
    pub allow_repetition: bool,
}

/// `N` imagined trajectories of length `T`, stored time-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImaginedRollout {
    /// `T + 1` feature matrices (`N x F`), starting with the start states.
    pub features: Vec<Tensor>,
    /// `T x N` actions taken from `features[t]`.
    pub actions: Vec<Vec<usize>>,
    /// `T x N` decoded extrinsic reward of the transition `t -> t+1`.
    pub rewards: Vec<Vec<f64>>,
    /// `T x N` intrinsic reward of that transition.
    pub intrinsic: Vec<Vec<f64>>,
    /// `T x N` continuation probability after the transition.
    pub cont: Vec<Vec<f64>>,
    /// `T x N` most likely transition caption index.
    pub captions: Vec<Vec<usize>>,
}

impl ImaginedRollout {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn starts(&self) -> usize {
        self.features[0].rows()
    }

    /// Fills `intrinsic` from per-start goal tables.
    pub fn assign_intrinsic(&mut self, tables: &[GoalTable], table_of_start: &[usize], spec: IntrinsicSpec) -> Result<()> {
        let (t_len, n) = (self.horizon(), self.starts());
        if table_of_start.len() != n {
            return Err(Error::Length(format!("{} goal tables for {n} starts", table_of_start.len())));
        }
        for (i, &ti) in table_of_start.iter().enumerate() {
            let table = &tables[ti];
            let cos: Vec<Vec<f64>> = (0..t_len).map(|t| table.cosines[self.captions[t][i]].clone()).collect();
            let r = intrinsic_from_cosines(&cos, &table.magnitudes, spec.alpha, spec.threshold, spec.allow_repetition)?;
            for t in 0..t_len {
                self.intrinsic[t][i] = r[t];
            }
        }
        Ok(())
    }
}

/// Per-update scalars reported by [`Agent::train`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AgentStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub mean_return: f64,
    pub mean_intrinsic: f64,
    pub scale: f64,
}

#[derive(Clone, Debug)]
pub struct Agent {
    cfg: AgentConfig,
    actions: usize,
    twohot: TwoHotSpec,
    actor_params: ParameterSet,
    actor: Mlp,
    critic_params: ParameterSet,
    critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    normalizer: ReturnNormalizer,
}

fn widths(input: usize, hidden: usize, layers: usize, output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend(std::iter::repeat(hidden).take(layers));
    w.push(output);
    w
}

impl Agent {
    pub fn new<R: Rng>(cfg: AgentConfig, feature_dim: usize, actions: usize, rng: &mut R) -> Self {
        let twohot = TwoHotSpec::default();
        let mut actor_params = ParameterSet::new();
        let actor = Mlp::new(
            &mut actor_params,
            "actor",
            &widths(feature_dim, cfg.hidden, cfg.layers, actions),
            Activation::Linear,
            rng,
        );
        let mut critic_params = ParameterSet::new();
        let critic = Mlp::new(
            &mut critic_params,
            "critic",
            &widths(feature_dim, cfg.hidden, cfg.layers, twohot.len()),
            Activation::Linear,
            rng,
        );
        // values start at exactly zero
        let last = critic.layers.last().expect("layers").w;
        critic_params.value_mut(last).data_mut().iter_mut().for_each(|w| *w = 0.0);
        Self {
            actor_opt: Adam::new(cfg.actor_lr).with_clip(cfg.clip),
            critic_opt: Adam::new(cfg.critic_lr).with_clip(cfg.clip),
            normalizer: ReturnNormalizer::new(cfg.normalizer_decay),
            cfg,
            actions,
            twohot,
            actor_params,
            actor,
            critic_params,
            critic,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn normalizer(&self) -> &ReturnNormalizer {
        &self.normalizer
    }

    pub fn actor_params(&self) -> &ParameterSet {
        &self.actor_params
    }

    pub fn actor_params_mut(&mut self) -> &mut ParameterSet {
        &mut self.actor_params
    }

    pub fn critic_params(&self) -> &ParameterSet {
        &self.critic_params
    }

    pub fn critic_params_mut(&mut self) -> &mut ParameterSet {
        &mut self.critic_params
    }

    pub fn twohot(&self) -> &TwoHotSpec {
        &self.twohot
    }

    pub fn actor_logits_tape(&self, tape: &mut Tape, feat: Var) -> Result<Var> {
        self.actor.forward(tape, &self.actor_params, feat)
    }

    pub fn critic_logits_tape(&self, tape: &mut Tape, feat: Var) -> Result<Var> {
        self.critic.forward(tape, &self.critic_params, feat)
    }

    /// Action probabilities per row.
    pub fn policy(&self, feat: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let f = tape.constant(feat.clone());
        let l = self.actor_logits_tape(&mut tape, f)?;
        let p = tape.softmax(l, self.actions)?;
        Ok(tape.value(p).clone())
    }

    /// Critic value (expected bin center) per row.
    pub fn values(&self, feat: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let f = tape.constant(feat.clone());
        let l = self.critic_logits_tape(&mut tape, f)?;
        let p = tape.softmax(l, self.twohot.len())?;
        let p = tape.value(p);
        (0..feat.rows()).map(|r| self.twohot.decode(p.row_slice(r))).collect()
    }

    /// Draws one action per row; row `i` uses `rngs[i]`.
    pub fn act(&self, feat: &Tensor, rngs: &mut [ChaCha8Rng]) -> Result<Vec<usize>> {
        let probs = self.policy(feat)?;
        Ok((0..feat.rows())
            .map(|r| sample_index(probs.row_slice(r), &mut rngs[r]))
            .collect())
    }

    /// Rolls the world model forward `horizon` steps from `start` under the
    /// current policy. Start `i` draws all its randomness from `rngs[i]`.
    pub fn imagine(
        &self,
        wm: &WorldModel,
        start: &LatentState,
        horizon: usize,
        rngs: &mut [ChaCha8Rng],
    ) -> Result<ImaginedRollout> {
        let n = start.rows();
        if rngs.len() != n {
            return Err(Error::Length(format!("{} rng streams for {n} starts", rngs.len())));
        }
        let mut state = start.clone();
        let mut out = ImaginedRollout {
            features: vec![state.features()],
            actions: Vec::with_capacity(horizon),
            rewards: Vec::with_capacity(horizon),
            intrinsic: vec![vec![0.0; n]; horizon],
            cont: Vec::with_capacity(horizon),
            captions: Vec::with_capacity(horizon),
        };
        for t in 0..horizon {
            let actions = self.act(&out.features[t], rngs)?;
            let a = one_hot(&actions, self.actions);
            let (prior, h) = wm.sequence_step(&state.z, &state.h, &a)?;
            let classes = wm.config().classes;
            let mut z = vec![0.0; prior.len()];
            let cols = prior.cols();
            for (i, rng) in rngs.iter_mut().enumerate() {
                let row = &prior.row_slice(i);
                for (g, chunk) in row.chunks(classes).enumerate() {
                    let k = sample_index(chunk, rng);
                    z[i * cols + g * classes + k] = 1.0;
                }
            }
            state = LatentState {
                h,
                z: Tensor::matrix(n, cols, z),
            };
            let feat = concat_cols(&state.z, &state.h);
            let (rewards, cont, captions) = wm.predict(&feat)?;
            out.features.push(feat);
            out.actions.push(actions);
            out.rewards.push(rewards);
            out.cont.push(cont);
            out.captions.push(captions);
        }
        Ok(out)
    }

    /// Critic values for every rollout state, `T + 1` rows of `N`.
    pub fn rollout_values(&self, rollout: &ImaginedRollout) -> Result<Vec<Vec<f64>>> {
        rollout.features.iter().map(|f| self.values(f)).collect()
    }

    /// λ-returns per start over the combined extrinsic + intrinsic reward;
    /// `T` rows of `N`.
    pub fn rollout_returns(&self, rollout: &ImaginedRollout, values: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let (t_len, n) = (rollout.horizon(), rollout.starts());
        let mut out = vec![vec![0.0; n]; t_len];
        for i in 0..n {
            let r: Vec<f64> = (0..t_len).map(|t| rollout.rewards[t][i] + rollout.intrinsic[t][i]).collect();
            let c: Vec<f64> = (0..t_len).map(|t| rollout.cont[t][i]).collect();
            let v: Vec<f64> = (0..=t_len).map(|t| values[t][i]).collect();
            let ret = lambda_returns(&r, &c, &v, self.cfg.lambda, self.cfg.gamma)?;
            for t in 0..t_len {
                out[t][i] = ret[t];
            }
        }
        Ok(out)
    }

    /// Normalizer update, one actor step and one critic step on `rollout`.
    pub fn train(&mut self, rollout: &ImaginedRollout) -> Result<AgentStats> {
        let values = self.rollout_values(rollout)?;
        let returns = self.rollout_returns(rollout, &values)?;
        let flat: Vec<f64> = returns.iter().flatten().copied().collect();
        self.normalizer.update(&flat)?;

        let mut tape = Tape::new();
        let (actor_loss, entropy) = actor_loss(
            &mut tape,
            self,
            rollout,
            &returns,
            &values,
            self.normalizer.scale(),
            self.cfg.eta,
        )?;
        let a_val = tape.value(actor_loss).item();
        let grads = tape.backward(actor_loss)?;
        grads.accumulate_into(&tape, &mut self.actor_params);
        self.actor_opt.step(&mut self.actor_params)?;

        let mut tape = Tape::new();
        let c_loss = critic_loss(&mut tape, self, rollout, &returns)?;
        let c_val = tape.value(c_loss).item();
        let grads = tape.backward(c_loss)?;
        grads.accumulate_into(&tape, &mut self.critic_params);
        self.critic_opt.step(&mut self.critic_params)?;

        let count = flat.len().max(1) as f64;
        let intr: f64 = rollout.intrinsic.iter().flatten().sum();
        Ok(AgentStats {
            actor_loss: a_val,
            critic_loss: c_val,
            entropy,
            mean_return: flat.iter().sum::<f64>() / count,
            mean_intrinsic: intr / count,
            scale: self.normalizer.scale(),
        })
    }
}

fn feature_rows(rollout: &ImaginedRollout, t_len: usize) -> Tensor {
    let cols = rollout.features[0].cols();
    let mut data = Vec::with_capacity(t_len * rollout.starts() * cols);
    for f in &rollout.features[..t_len] {
        data.extend_from_slice(f.data());
    }
    Tensor::matrix(t_len * rollout.starts(), cols, data)
}

/// `mean(-sg(R - V) / max(1, S) * log pi(a|s) - eta H[pi(.|s)])` over the
/// first `T` states. Returns the loss variable and the mean entropy.
pub fn actor_loss(
    tape: &mut Tape,
    agent: &Agent,
    rollout: &ImaginedRollout,
    returns: &[Vec<f64>],
    values: &[Vec<f64>],
    scale: f64,
    eta: f64,
) -> Result<(Var, f64)> {
    let t_len = rollout.horizon();
    let n = rollout.starts();
    let a = agent.actions;
    let feat = tape.constant(feature_rows(rollout, t_len));
    let logits = agent.actor_logits_tape(tape, feat)?;
    let logp = tape.log_softmax(logits, a)?;
    let denom = scale.max(1.0);
    let mut weights = vec![0.0; t_len * n * a];
    for t in 0..t_len {
        for i in 0..n {
            let row = t * n + i;
            let adv = (returns[t][i] - values[t][i]) / denom;
            weights[row * a + rollout.actions[t][i]] = -adv;
        }
    }
    let w = tape.constant(Tensor::matrix(t_len * n, a, weights));
    let pg = tape.mul(w, logp)?;
    let pg = tape.row_sum(pg);
    // entropy -sum p log p per row
    let p = tape.exp(logp);
    let plogp = tape.mul(p, logp)?;
    let neg_h = tape.row_sum(plogp);
    let entropy = -tape.value(neg_h).data().iter().sum::<f64>() / (t_len * n) as f64;
    let ent_term = tape.scale(neg_h, eta);
    let per_row = tape.add(pg, ent_term)?;
    Ok((tape.mean(per_row), entropy))
}

/// `mean(catxent(V(s_t), sg(twohot(R_t))))` over the first `T` states.
pub fn critic_loss(tape: &mut Tape, agent: &Agent, rollout: &ImaginedRollout, returns: &[Vec<f64>]) -> Result<Var> {
    let t_len = rollout.horizon();
    let n = rollout.starts();
    let bins = agent.twohot.len();
    let feat = tape.constant(feature_rows(rollout, t_len));
    let logits = agent.critic_logits_tape(tape, feat)?;
    let logp = tape.log_softmax(logits, bins)?;
    let mut target = vec![0.0; t_len * n * bins];
    for t in 0..t_len {
        for i in 0..n {
            let row = t * n + i;
            agent
                .twohot
                .encode_into(returns[t][i], &mut target[row * bins..(row + 1) * bins])?;
        }
    }
    let target = tape.constant(Tensor::matrix(t_len * n, bins, target));
    let ce = tape.mul(target, logp)?;
    let ce = tape.row_sum(ce);
    let ce = tape.scale(ce, -1.0);
    Ok(tape.mean(ce))
}

pub fn one_hot(indices: &[usize], classes: usize) -> Tensor {
    let mut d = vec![0.0; indices.len() * classes];
    for (r, &i) in indices.iter().enumerate() {
        d[r * classes + i] = 1.0;
    }
    Tensor::matrix(indices.len(), classes, d)
}

pub fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return j;
        }
    }
    probs.len() - 1
}
