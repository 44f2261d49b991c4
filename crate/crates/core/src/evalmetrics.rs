//! Goal-quality metrics: novelty, correctness, context sensitivity and
//! common-sense sensitivity, judged against the gridworld's rule table.

use std::fmt::Write as _;

use crate::env::{transition_captions, Achievement, StateSummary};
use crate::error::Result;
use crate::textembed::{cosine, CaptionVocabulary, Embedder, SentenceEmbedding};

/// Minimum cosine for a goal to count as naming a vocabulary entry.
pub const MAP_THRESHOLD: f64 = 0.8;

/// What a goal text refers to in the environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoalTarget {
    Achievement(Achievement),
    Move,
    Noop,
}

/// Whether the state allows `a` to be accomplished right now.
pub fn preconditions_hold(a: Achievement, s: &StateSummary) -> bool {
    let inv = s.inventory;
    match a {
        Achievement::CollectWood => s.sees_tree,
        Achievement::PlaceTable => inv.wood >= 1,
        Achievement::MakeWoodPickaxe => inv.wood >= 1 && s.table_nearby,
        Achievement::CollectStone => inv.wood_pickaxe >= 1 && s.sees_stone,
        Achievement::MakeStonePickaxe => inv.wood >= 1 && inv.stone >= 1 && s.table_nearby,
    }
}

/// Maps goal texts onto the transition-caption vocabulary.
#[derive(Clone, Debug)]
pub struct GoalAssessor {
    vocab: CaptionVocabulary,
    targets: Vec<GoalTarget>,
    embedder: Embedder,
    threshold: f64,
}

impl GoalAssessor {
    pub fn new(embedder: Embedder, threshold: f64) -> Result<Self> {
        let captions = transition_captions();
        let targets = captions
            .iter()
            .map(|c| {
                Achievement::ALL
                    .iter()
                    .find(|a| a.caption() == c)
                    .map(|&a| GoalTarget::Achievement(a))
                    .unwrap_or(if c == "move" { GoalTarget::Move } else { GoalTarget::Noop })
            })
            .collect();
        let vocab = CaptionVocabulary::new(captions, &embedder)?;
        Ok(Self {
            vocab,
            targets,
            embedder,
            threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn embed(&self, text: &str) -> Option<SentenceEmbedding> {
        self.embedder.embed(text).ok()
    }

    /// Nearest vocabulary entry, if its cosine reaches the threshold.
    pub fn map_goal(&self, goal: &str) -> Option<GoalTarget> {
        let e = self.embed(goal)?;
        let (i, cos) = self.vocab.nearest(&e).ok()?;
        (cos >= self.threshold).then_some(self.targets[i])
    }

    /// Prerequisites fulfilled and the achievement not yet unlocked this
    /// episode.
    pub fn assess_novelty(&self, goal: &str, s: &StateSummary) -> bool {
        match self.map_goal(goal) {
            Some(GoalTarget::Achievement(a)) => preconditions_hold(a, s) && !s.achievements.contains(a),
            _ => false,
        }
    }

    /// Prerequisites fulfilled, whether or not the goal was already reached.
    pub fn assess_context_sensitivity(&self, goal: &str, s: &StateSummary) -> bool {
        match self.map_goal(goal) {
            Some(GoalTarget::Achievement(a)) => preconditions_hold(a, s),
            Some(GoalTarget::Move | GoalTarget::Noop) => true,
            None => false,
        }
    }

    /// Feasible in at least one situation.
    pub fn assess_common_sense(&self, goal: &str) -> bool {
        self.map_goal(goal).is_some()
    }

    /// Matches one of the oracle's goals for the state.
    pub fn assess_correctness(&self, goal: &str, oracle: &[String]) -> bool {
        let Some(e) = self.embed(goal) else {
            return false;
        };
        oracle.iter().any(|o| {
            self.embed(o)
                .and_then(|oe| cosine(&e, &oe).ok())
                .is_some_and(|c| c >= self.threshold)
        })
    }

    /// All four judgements for one (state, goal) pair.
    pub fn assess(&self, goal: &str, s: &StateSummary, oracle: &[String]) -> Assessment {
        Assessment {
            assessable: self.map_goal(goal).is_some(),
            novel: self.assess_novelty(goal, s),
            correct: self.assess_correctness(goal, oracle),
            context: self.assess_context_sensitivity(goal, s),
            common_sense: self.assess_common_sense(goal),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Assessment {
    pub assessable: bool,
    pub novel: bool,
    pub correct: bool,
    pub context: bool,
    pub common_sense: bool,
}

/// Tally over a window of (state, goal) pairs. Goals that do not map onto
/// the vocabulary count as negatives for every state-dependent metric and
/// are also tallied in `unassessable`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GoalQualityReport {
    pub step: u64,
    pub samples: u64,
    pub unassessable: u64,
    pub novel: u64,
    pub correct: u64,
    pub context: u64,
    pub common_sense: u64,
}

impl GoalQualityReport {
    pub const CSV_HEADER: &'static str = "step,samples,unassessable,novel,correct,context,common_sense,novelty_rate,correctness_rate,context_rate,common_sense_rate";

    pub fn add(&mut self, a: Assessment) {
        self.samples += 1;
        self.unassessable += u64::from(!a.assessable);
        self.novel += u64::from(a.novel);
        self.correct += u64::from(a.correct);
        self.context += u64::from(a.context);
        self.common_sense += u64::from(a.common_sense);
    }

    fn rate(&self, n: u64) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            n as f64 / self.samples as f64
        }
    }

    pub fn novelty_rate(&self) -> f64 {
        self.rate(self.novel)
    }

    pub fn correctness_rate(&self) -> f64 {
        self.rate(self.correct)
    }

    pub fn context_rate(&self) -> f64 {
        self.rate(self.context)
    }

    pub fn common_sense_rate(&self) -> f64 {
        self.rate(self.common_sense)
    }

    pub fn merge(&mut self, other: &GoalQualityReport) {
        self.samples += other.samples;
        self.unassessable += other.unassessable;
        self.novel += other.novel;
        self.correct += other.correct;
        self.context += other.context;
        self.common_sense += other.common_sense;
    }

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            self.step,
            self.samples,
            self.unassessable,
            self.novel,
            self.correct,
            self.context,
            self.common_sense,
            self.novelty_rate(),
            self.correctness_rate(),
            self.context_rate(),
            self.common_sense_rate()
        );
        s
    }

    /// Parses a row written by [`Self::csv_row`].
    pub fn from_csv_row(line: &str) -> Option<Self> {
        let f: Vec<u64> = line.split(',').take(7).map(|v| v.parse().ok()).collect::<Option<_>>()?;
        (f.len() == 7).then(|| Self {
            step: f[0],
            samples: f[1],
            unassessable: f[2],
            novel: f[3],
            correct: f[4],
            context: f[5],
            common_sense: f[6],
        })
    }
}
