use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::agent::AgentStats;
use crate::env::{Achievement, Achievements};
use crate::error::{Error, Result};
use crate::evalmetrics::GoalQualityReport;
use crate::worldmodel::LossBreakdown;

/// Column names of `metrics.csv`, in order.
pub const METRICS_HEADER: &[&str] = &[
    "step",
    "updates",
    "episodes",
    "episode_return",
    "episode_length",
    "achievements",
    "mean_intrinsic",
    "rnd_error",
    "rnd_magnitude",
    "wm_total",
    "wm_obs",
    "wm_caption",
    "wm_reward",
    "wm_cont",
    "wm_pred",
    "wm_reg",
    "wm_kl",
    "actor_loss",
    "critic_loss",
    "entropy",
    "return_scale",
    "novelty_rate",
    "correctness_rate",
    "context_rate",
    "common_sense_rate",
];

pub const EPISODES_HEADER: &str = "end_step,length,return,achievements,collect_wood,place_table,make_wood_pickaxe,collect_stone,make_stone_pickaxe";

/// Scalars of one training update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrainStats {
    pub wm: LossBreakdown,
    pub agent: AgentStats,
    /// Occurrence-weighted mean RND error of the batch goals.
    pub rnd_error: f64,
    /// Occurrence-weighted mean standardized novelty magnitude.
    pub rnd_magnitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub end_step: u64,
    pub length: u32,
    pub ret: f64,
    pub achievements: Achievements,
}

impl EpisodeSummary {
    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{},{},{},{}",
            self.end_step,
            self.length,
            self.ret,
            self.achievements.count()
        );
        for a in Achievement::ALL {
            let _ = write!(s, ",{}", u8::from(self.achievements.contains(a)));
        }
        s
    }
}

/// Running sums between two metrics rows.
#[derive(Clone, Debug, Default)]
pub struct MetricsAccumulator {
    train: Vec<[f64; 15]>,
    episodes: Vec<EpisodeSummary>,
}

fn train_fields(s: &TrainStats) -> [f64; 15] {
    [
        s.agent.mean_intrinsic,
        s.rnd_error,
        s.rnd_magnitude,
        s.wm.total,
        s.wm.obs,
        s.wm.caption,
        s.wm.reward,
        s.wm.cont,
        s.wm.pred,
        s.wm.reg,
        s.wm.kl,
        s.agent.actor_loss,
        s.agent.critic_loss,
        s.agent.entropy,
        s.agent.scale,
    ]
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

fn field(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl MetricsAccumulator {
    pub fn add_train(&mut self, s: &TrainStats) {
        self.train.push(train_fields(s));
    }

    pub fn add_episode(&mut self, e: EpisodeSummary) {
        self.episodes.push(e);
    }

    /// One `metrics.csv` row; fields without data in the interval are empty.
    pub fn row(&mut self, step: u64, total_updates: u64, total_episodes: usize, goals: &GoalQualityReport) -> String {
        let mut cols = vec![step.to_string(), total_updates.to_string(), total_episodes.to_string()];
        let eps = &self.episodes;
        cols.push(field(mean(eps.iter().map(|e| e.ret))));
        cols.push(field(mean(eps.iter().map(|e| f64::from(e.length)))));
        cols.push(field(mean(eps.iter().map(|e| e.achievements.count() as f64))));
        for i in 0..15 {
            cols.push(field(mean(self.train.iter().map(|r| r[i]))));
        }
        let rate = |f: fn(&GoalQualityReport) -> f64| (goals.samples > 0).then(|| f(goals));
        cols.push(field(rate(GoalQualityReport::novelty_rate)));
        cols.push(field(rate(GoalQualityReport::correctness_rate)));
        cols.push(field(rate(GoalQualityReport::context_rate)));
        cols.push(field(rate(GoalQualityReport::common_sense_rate)));
        self.train.clear();
        self.episodes.clear();
        cols.join(",")
    }
}

/// Crafter-style score: geometric mean of `1 + success %`, minus one.
pub fn crafter_score(success_rates: &[f64]) -> f64 {
    if success_rates.is_empty() {
        return 0.0;
    }
    let n = success_rates.len() as f64;
    (success_rates.iter().map(|r| (1.0 + 100.0 * r).ln()).sum::<f64>() / n).exp() - 1.0
}

/// Final report of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: u64,
    pub updates: u64,
    pub episodes: usize,
    /// Episodes ending in the final `final_fraction` of the run.
    pub final_episodes: usize,
    pub final_mean_achievements: f64,
    pub final_mean_return: f64,
    /// Per-achievement success rate over the final episodes, in
    /// [`Achievement::ALL`] order.
    pub final_success_rates: Vec<f64>,
    pub final_score: f64,
    pub goal_correctness_rate: f64,
    pub goal_novelty_rate: f64,
    pub goal_context_rate: f64,
    pub goal_common_sense_rate: f64,
    pub novelty_implies_context: bool,
    pub provider_invocations: u64,
}

impl RunSummary {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad summary: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Mean achievements, mean return and success rates over `episodes`.
pub fn episode_stats(episodes: &[EpisodeSummary]) -> (f64, f64, Vec<f64>) {
    let n = episodes.len().max(1) as f64;
    let ach = episodes.iter().map(|e| e.achievements.count() as f64).sum::<f64>() / n;
    let ret = episodes.iter().map(|e| e.ret).sum::<f64>() / n;
    let rates = Achievement::ALL
        .iter()
        .map(|&a| episodes.iter().filter(|e| e.achievements.contains(a)).count() as f64 / n)
        .collect();
    (ach, ret, rates)
}

/// Parses a CSV with a header row into column names and rows; empty fields
/// become `None`.
pub type CsvTable = (Vec<String>, Vec<Vec<Option<f64>>>);

pub fn read_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Config("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<Option<f64>> = line
            .split(',')
            .map(|f| if f.is_empty() { Ok(None) } else { f.parse().map(Some) })
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("CSV row {} is not numeric", i + 2)))?;
        if row.len() != header.len() {
            return Err(Error::Config(format!("CSV row {} has {} fields", i + 2, row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Folds every row of a `goal_quality.csv` into one report.
pub fn aggregate_goal_report(text: &str) -> Result<(GoalQualityReport, usize)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h == GoalQualityReport::CSV_HEADER => {}
        _ => return Err(Error::Config("not a goal-quality report".into())),
    }
    let mut total = GoalQualityReport::default();
    let mut windows = 0;
    for line in lines {
        let r = GoalQualityReport::from_csv_row(line)
            .ok_or_else(|| Error::Config(format!("bad goal-quality row `{line}`")))?;
        total.merge(&r);
        total.step = r.step;
        windows += 1;
    }
    Ok((total, windows))
}
