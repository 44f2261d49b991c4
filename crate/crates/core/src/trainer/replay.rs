use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::diffmath::Tensor;
use crate::error::{Error, Result};
use crate::goalsource::GoalSet;
use crate::textembed::SentenceEmbedding;
use crate::worldmodel::SequenceBatch;

/// One acting step: the observation reached, the caption of the transition
/// that led to it, the reward and continuation flag of that transition, the
/// action that caused it (`None` at episode start) and the goals in force.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRecord {
    pub obs: Vec<f64>,
    pub caption: String,
    pub caption_emb: Arc<SentenceEmbedding>,
    pub caption_index: usize,
    pub action: Option<usize>,
    pub reward: f64,
    pub cont: bool,
    pub goals: Arc<GoalSet>,
}

impl TransitionRecord {
    pub fn is_first(&self) -> bool {
        self.action.is_none()
    }
}

/// Episodes in arrival order; the oldest whole episodes are dropped once
/// the step count exceeds the capacity.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    episodes: VecDeque<Vec<TransitionRecord>>,
    capacity: usize,
    len: usize,
    /// Whether the newest episode is still being written.
    open: bool,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            episodes: VecDeque::new(),
            capacity,
            len: 0,
            open: false,
        }
    }

    /// Total stored records.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn episodes(&self) -> impl Iterator<Item = &[TransitionRecord]> {
        self.episodes.iter().map(Vec::as_slice)
    }

    pub fn num_episodes(&self) -> usize {
        self.episodes.len()
    }

    /// Appends a record. A record without an action starts a new episode.
    pub fn push(&mut self, record: TransitionRecord) {
        if record.is_first() || !self.open {
            self.episodes.push_back(Vec::new());
        }
        self.open = record.cont;
        self.episodes.back_mut().expect("pushed above").push(record);
        self.len += 1;
        while self.len > self.capacity && self.episodes.len() > 1 {
            let dropped = self.episodes.pop_front().expect("non-empty");
            self.len -= dropped.len();
        }
    }

    /// Number of in-episode windows of length `l`.
    pub fn windows(&self, l: usize) -> usize {
        self.episodes.iter().map(|e| (e.len() + 1).saturating_sub(l)).sum()
    }

    /// `b` windows of length `l`, each drawn uniformly from all in-episode
    /// windows.
    pub fn sample_batch<R: Rng>(&self, b: usize, l: usize, rng: &mut R) -> Result<Vec<&[TransitionRecord]>> {
        let total = self.windows(l);
        if total == 0 || l == 0 {
            return Err(Error::NotEnoughData {
                have: self.len,
                need: l.max(1),
            });
        }
        let mut out = Vec::with_capacity(b);
        for _ in 0..b {
            let mut k = rng.gen_range(0..total);
            for e in &self.episodes {
                let n = (e.len() + 1).saturating_sub(l);
                if k < n {
                    out.push(&e[k..k + l]);
                    break;
                }
                k -= n;
            }
        }
        Ok(out)
    }
}

/// Time-major world-model batch from equal-length windows.
pub fn to_sequence_batch(windows: &[&[TransitionRecord]], actions: usize) -> Result<SequenceBatch> {
    let b = windows.len();
    let l = windows.first().map_or(0, |w| w.len());
    if b == 0 || windows.iter().any(|w| w.len() != l) {
        return Err(Error::Length("windows must be non-empty and of equal length".into()));
    }
    let obs_dim = windows[0][0].obs.len();
    let emb_dim = windows[0][0].caption_emb.dim();
    let mut batch = SequenceBatch {
        batch: b,
        len: l,
        obs: Vec::with_capacity(l),
        caption_emb: Vec::with_capacity(l),
        caption_index: Vec::with_capacity(l),
        reward: Vec::with_capacity(l),
        cont: Vec::with_capacity(l),
        prev_action: Vec::with_capacity(l),
    };
    for t in 0..l {
        let mut obs = Vec::with_capacity(b * obs_dim);
        let mut emb = Vec::with_capacity(b * emb_dim);
        let mut act = vec![0.0; b * actions];
        for (i, w) in windows.iter().enumerate() {
            let r = &w[t];
            obs.extend_from_slice(&r.obs);
            emb.extend_from_slice(r.caption_emb.vector());
            if let Some(a) = r.action {
                act[i * actions + a] = 1.0;
            }
        }
        batch.obs.push(Tensor::matrix(b, obs_dim, obs));
        batch.caption_emb.push(Tensor::matrix(b, emb_dim, emb));
        batch.prev_action.push(Tensor::matrix(b, actions, act));
        batch.caption_index.push(windows.iter().map(|w| w[t].caption_index).collect());
        batch.reward.push(windows.iter().map(|w| w[t].reward).collect());
        batch.cont.push(windows.iter().map(|w| f64::from(u8::from(w[t].cont))).collect());
    }
    Ok(batch)
}
