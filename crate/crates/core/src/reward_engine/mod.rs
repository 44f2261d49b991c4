//! Goal-matching intrinsic rewards.
//!
//! Imagined transition captions are compared to goal embeddings by cosine
//! similarity; a goal pays out once per rollout, at the first step its score
//! exceeds the threshold, scaled by a per-goal novelty magnitude obtained
//! from random network distillation.

mod rnd;

pub use rnd::{rnd_error, rnd_update, normalize, RndConfig, RndPair, RunningStats, SIGMA_FLOOR};

use crate::error::{Error, Result};
use crate::textembed::{cosine_slices, SentenceEmbedding};

/// Cosine similarity if it is strictly above `m`, else zero.
pub fn match_score(u_hat: &SentenceEmbedding, g: &SentenceEmbedding, m: f64) -> Result<f64> {
    let c = cosine_slices(u_hat.vector(), g.vector())?;
    Ok(thresholded(c, m))
}

fn thresholded(c: f64, m: f64) -> f64 {
    if c > m {
        c
    } else {
        0.0
    }
}

/// Scores of one rollout against one goal set.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// `w[t][k]`: thresholded score of step `t` against goal `k`.
    pub w: Vec<Vec<f64>>,
    /// First step whose raw cosine exceeds the threshold, per goal.
    pub first_hit: Vec<Option<usize>>,
}

impl MatchResult {
    /// From a `T x K` table of raw cosines.
    pub fn from_cosines(cosines: &[Vec<f64>], m: f64) -> Self {
        let k = cosines.first().map_or(0, Vec::len);
        let mut first_hit = vec![None; k];
        let w = cosines
            .iter()
            .enumerate()
            .map(|(t, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, &c)| {
                        let s = thresholded(c, m);
                        if s > 0.0 && first_hit[j].is_none() {
                            first_hit[j] = Some(t);
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        Self { w, first_hit }
    }

    pub fn compute(u_hats: &[SentenceEmbedding], goals: &[SentenceEmbedding], m: f64) -> Result<Self> {
        Ok(Self::from_cosines(&cosine_table(u_hats, goals)?, m))
    }
}

/// Intrinsic reward per step from a `T x K` cosine table.
///
/// With `allow_repetition` every step above the threshold pays out instead of
/// only the first one per goal.
pub fn intrinsic_from_cosines(
    cosines: &[Vec<f64>],
    magnitudes: &[f64],
    alpha: f64,
    m: f64,
    allow_repetition: bool,
) -> Result<Vec<f64>> {
    let matched = MatchResult::from_cosines(cosines, m);
    let mut out = vec![0.0; cosines.len()];
    for (t, row) in matched.w.iter().enumerate() {
        if row.len() != magnitudes.len() {
            return Err(Error::Length(format!(
                "{} goals scored but {} magnitudes",
                row.len(),
                magnitudes.len()
            )));
        }
        let mut r = 0.0;
        for (k, (&w, &i)) in row.iter().zip(magnitudes).enumerate() {
            if allow_repetition || matched.first_hit[k] == Some(t) {
                r += w * i;
            }
        }
        out[t] = alpha * r;
    }
    Ok(out)
}

/// `r_t = alpha * sum_k w_t^k i_k [t = first hit of k]` for one rollout.
pub fn rollout_intrinsic_rewards(
    u_hats: &[SentenceEmbedding],
    goals: &[SentenceEmbedding],
    magnitudes: &[f64],
    alpha: f64,
    m: f64,
) -> Result<Vec<f64>> {
    intrinsic_from_cosines(&cosine_table(u_hats, goals)?, magnitudes, alpha, m, false)
}

fn cosine_table(u_hats: &[SentenceEmbedding], goals: &[SentenceEmbedding]) -> Result<Vec<Vec<f64>>> {
    u_hats
        .iter()
        .map(|u| {
            goals
                .iter()
                .map(|g| cosine_slices(u.vector(), g.vector()))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests;
