//! Language goal providers.
//!
//! A [`GoalSource`] asks its [`GoalProvider`] for `K` goal texts every
//! `query_interval` environment steps and hands out the most recent
//! [`GoalSet`] in between.

mod cache;
mod prompt;
mod remote;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use cache::QueryCache;
pub use prompt::{parse_goals, parse_observation_caption, render_prompt, ObservationFields, PromptMode, PromptTemplate};
pub use remote::{RemoteClient, ENDPOINT_ENV, TOKEN_ENV};

use crate::env::{Achievement, StateSummary};
use crate::error::{Error, Result};
use crate::textembed::{CaptionVocabulary, Embedder, SentenceEmbedding};

/// Filler goal used by the scripted provider when nothing else applies.
pub const EXPLORE_GOAL: &str = "explore the map";

#[derive(Clone, Debug, PartialEq)]
pub struct Goal {
    pub text: String,
    pub embedding: SentenceEmbedding,
}

/// Exactly `K` goals with unit-norm embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalSet {
    goals: Vec<Goal>,
    pub query_step: u64,
}

impl GoalSet {
    /// Truncates to `k`, or pads by repeating the last goal.
    pub fn from_texts(texts: &[String], k: usize, embedder: &Embedder, query_step: u64) -> Result<Self> {
        if texts.is_empty() || k == 0 {
            return Err(Error::EmptyCompletion);
        }
        let mut goals = Vec::with_capacity(k);
        for text in texts.iter().take(k) {
            goals.push(Goal {
                text: text.clone(),
                embedding: embedder.embed(text)?,
            });
        }
        while goals.len() < k {
            goals.push(goals.last().expect("non-empty").clone());
        }
        Ok(Self { goals, query_step })
    }

    pub fn goals(&self) -> &[Goal] {
        &self.goals
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.goals.iter().map(|g| g.text.as_str()).collect()
    }

    pub fn embeddings(&self) -> impl Iterator<Item = &SentenceEmbedding> {
        self.goals.iter().map(|g| &g.embedding)
    }
}

/// Rule-table goal texts for a state: the next unfinished steps of the
/// technology chain whose preconditions are visible, then filler.
pub fn scripted_goal_texts(s: &StateSummary, k: usize) -> Vec<String> {
    let done = |a| s.achievements.contains(a);
    let inv = s.inventory;
    let wood_needed = [
        Achievement::PlaceTable,
        Achievement::MakeWoodPickaxe,
        Achievement::MakeStonePickaxe,
    ]
    .iter()
    .filter(|&&a| !done(a))
    .count() as u32;
    let mut out = Vec::with_capacity(k);
    if s.sees_tree && inv.wood < wood_needed {
        out.push(Achievement::CollectWood.caption());
    }
    if inv.wood >= 1 && !done(Achievement::PlaceTable) {
        out.push(Achievement::PlaceTable.caption());
    }
    if s.table_nearby && inv.wood >= 1 && inv.wood_pickaxe == 0 {
        out.push(Achievement::MakeWoodPickaxe.caption());
    }
    if inv.wood_pickaxe >= 1 && s.sees_stone && inv.stone == 0 && inv.stone_pickaxe == 0 {
        out.push(Achievement::CollectStone.caption());
    }
    if s.table_nearby && inv.wood >= 1 && inv.stone >= 1 && inv.stone_pickaxe == 0 {
        out.push(Achievement::MakeStonePickaxe.caption());
    }
    let mut out: Vec<String> = out.into_iter().take(k).map(str::to_string).collect();
    while out.len() < k {
        out.push(EXPLORE_GOAL.to_string());
    }
    out
}

pub fn scripted_goals(summary: &StateSummary, k: usize, embedder: &Embedder) -> Result<GoalSet> {
    GoalSet::from_texts(&scripted_goal_texts(summary, k), k, embedder, 0)
}

/// `k` uniform draws with replacement from the vocabulary.
pub fn random_goals(vocab: &CaptionVocabulary, k: usize, seed: u64, embedder: &Embedder) -> Result<GoalSet> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texts: Vec<String> = (0..k)
        .map(|_| vocab.caption(rng.gen_range(0..vocab.len())).to_string())
        .collect();
    GoalSet::from_texts(&texts, k, embedder, 0)
}

/// Goals from the remote service, served from `cache` when the same prompt
/// was already answered.
pub fn remote_goals(
    obs_caption: &str,
    template: &PromptTemplate,
    k: usize,
    cache: &mut QueryCache,
    client: Option<&mut RemoteClient>,
    embedder: &Embedder,
) -> Result<GoalSet> {
    let user = template.render_game_info(obs_caption);
    let prompt = render_prompt(template, obs_caption);
    let key = QueryCache::hash_prompt(&prompt);
    if let Some(texts) = cache.lookup(&key) {
        return GoalSet::from_texts(texts, k, embedder, 0);
    }
    let client = client.ok_or_else(|| {
        Error::RemoteUnavailable(format!("{ENDPOINT_ENV} not set and prompt not cached"))
    })?;
    let completion = client.complete(&template.system_text, &user)?;
    let texts = parse_goals(&completion, k)?;
    cache.insert(&key, &prompt, &texts)?;
    GoalSet::from_texts(&texts, k, embedder, 0)
}

/// Inputs a provider may look at when asked for goals.
pub struct GoalContext<'a> {
    pub summary: &'a StateSummary,
    pub obs_caption: &'a str,
    pub step: u64,
}

pub trait GoalProvider {
    fn name(&self) -> &'static str;
    fn propose(&mut self, ctx: &GoalContext<'_>, k: usize) -> Result<Vec<String>>;
}

#[derive(Clone, Debug, Default)]
pub struct ScriptedProvider;

impl GoalProvider for ScriptedProvider {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn propose(&mut self, ctx: &GoalContext<'_>, k: usize) -> Result<Vec<String>> {
        Ok(scripted_goal_texts(ctx.summary, k))
    }
}

/// Goals drawn uniformly from the caption vocabulary, ignoring the state.
#[derive(Clone, Debug)]
pub struct RandomProvider {
    vocab: CaptionVocabulary,
    rng: ChaCha8Rng,
}

impl RandomProvider {
    pub fn new(vocab: CaptionVocabulary, seed: u64) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Ok(Self {
            vocab,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl GoalProvider for RandomProvider {
    fn name(&self) -> &'static str {
        "random"
    }

    fn propose(&mut self, _ctx: &GoalContext<'_>, k: usize) -> Result<Vec<String>> {
        Ok((0..k)
            .map(|_| self.vocab.caption(self.rng.gen_range(0..self.vocab.len())).to_string())
            .collect())
    }
}

pub struct RemoteProvider {
    pub template: PromptTemplate,
    pub cache: QueryCache,
    pub client: Option<RemoteClient>,
}

impl GoalProvider for RemoteProvider {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn propose(&mut self, ctx: &GoalContext<'_>, k: usize) -> Result<Vec<String>> {
        let prompt = render_prompt(&self.template, ctx.obs_caption);
        let key = QueryCache::hash_prompt(&prompt);
        if let Some(texts) = self.cache.lookup(&key) {
            return Ok(texts.to_vec());
        }
        let client = self.client.as_mut().ok_or_else(|| {
            Error::RemoteUnavailable(format!("{ENDPOINT_ENV} not set and prompt not cached"))
        })?;
        let completion = client.complete(&self.template.system_text, &self.template.render_game_info(ctx.obs_caption))?;
        let texts = parse_goals(&completion, k)?;
        self.cache.insert(&key, &prompt, &texts)?;
        Ok(texts)
    }
}

/// Rate-limited wrapper: one provider call per `query_interval` steps.
pub struct GoalSource {
    provider: Box<dyn GoalProvider + Send>,
    fallback: Option<Box<dyn GoalProvider + Send>>,
    k: usize,
    query_interval: u64,
    embedder: Embedder,
    current: Option<GoalSet>,
    invocations: u64,
}

impl GoalSource {
    pub fn new(provider: Box<dyn GoalProvider + Send>, k: usize, query_interval: u64, embedder: Embedder) -> Self {
        assert!(query_interval > 0, "query interval must be positive");
        Self {
            provider,
            fallback: None,
            k,
            query_interval,
            embedder,
            current: None,
            invocations: 0,
        }
    }

    /// Provider consulted when the primary one reports it is unavailable.
    pub fn with_fallback(mut self, fallback: Box<dyn GoalProvider + Send>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn invocations(&self) -> u64 {
        self.invocations
    }

    pub fn provider_name(&self) -> &'static str {
        self.provider.name()
    }

    pub fn current(&self) -> Option<&GoalSet> {
        self.current.as_ref()
    }

    /// Goals for environment step `ctx.step` (counted per environment
    /// instance from zero).
    pub fn goals_for(&mut self, ctx: &GoalContext<'_>) -> Result<&GoalSet> {
        let due = self.current.is_none() || ctx.step % self.query_interval == 0;
        if due {
            self.invocations += 1;
            let texts = match self.provider.propose(ctx, self.k) {
                Err(Error::RemoteUnavailable(msg)) => match self.fallback.as_mut() {
                    Some(fb) => fb.propose(ctx, self.k)?,
                    None => return Err(Error::RemoteUnavailable(msg)),
                },
                other => other?,
            };
            self.current = Some(GoalSet::from_texts(&texts, self.k, &self.embedder, ctx.step)?);
        }
        Ok(self.current.as_ref().expect("set above"))
    }
}
