//! Preference-accuracy benchmarking.
//!
//! Scores every response of a ranked dataset with the reward model (under
//! a configurable critique regime), then checks how often the scores agree
//! with the human ranking:
//!
//! ```text
//! ACC  = correctly ordered pairs / all pairs          (pair-weighted)
//! ACC+ = items with every pair correct / items        (item-weighted)
//! ```
//!
//! A pair counts as correct only when the preferred response scores
//! strictly higher — ties are wrong. Items that admit no comparison (all
//! ranks tied, or a single response) are excluded from both rates and
//! reported by id so callers can surface them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Category, Dataset, TokenSeq};
use crate::pairs::{all_pairs, ComparisonPair};
use crate::policy::{FrozenPolicy, PolicyError, PolicyParams};
use crate::reward::{infer, score_response, RewardError, RewardModelParams, ScoreRecord};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no pairs to evaluate")]
    EmptyPairs,
    #[error("unknown critique mode {name:?}; expected inferred, gt, or none")]
    UnknownMode { name: String },
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Where the critique conditioning the score comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CritiqueMode {
    /// The model writes its own critique (greedy decode), then scores.
    Inferred,
    /// Score conditioned on the annotated critique.
    GroundTruth,
    /// Score with the critique channel zeroed (the ablation).
    NoCritique,
}

impl CritiqueMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CritiqueMode::Inferred => "inferred",
            CritiqueMode::GroundTruth => "gt",
            CritiqueMode::NoCritique => "none",
        }
    }
}

impl std::fmt::Display for CritiqueMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CritiqueMode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s {
            "inferred" => Ok(CritiqueMode::Inferred),
            "gt" => Ok(CritiqueMode::GroundTruth),
            "none" => Ok(CritiqueMode::NoCritique),
            other => Err(EvalError::UnknownMode {
                name: other.to_string(),
            }),
        }
    }
}

/// Scores every response of every item, in dataset order, under the given
/// critique regime. `max_critique_len` caps the decoded critique in
/// inferred mode and is ignored otherwise. The record keeps the critique
/// actually used.
pub fn score_dataset(
    rm: &RewardModelParams,
    dataset: &Dataset,
    mode: CritiqueMode,
    max_critique_len: usize,
) -> Result<Vec<ScoreRecord>, EvalError> {
    let mut records = Vec::new();
    for item in dataset.items() {
        let query = item.query();
        for (idx, response) in item.responses.iter().enumerate() {
            let (critique, score) = match mode {
                CritiqueMode::Inferred => {
                    let out = infer(rm, &query, &response.tokens, max_critique_len)?;
                    (out.critique, out.score)
                }
                CritiqueMode::GroundTruth => (
                    response.critique.clone(),
                    score_response(rm, &query, &response.tokens, &response.critique)?,
                ),
                CritiqueMode::NoCritique => (
                    TokenSeq::empty(),
                    score_response(rm, &query, &response.tokens, &TokenSeq::empty())?,
                ),
            };
            records.push(ScoreRecord {
                query_id: item.id.clone(),
                response_idx: idx as u32,
                critique_tokens: critique,
                score,
            });
        }
    }
    Ok(records)
}

/// Agreement counts for one slice of the benchmark.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub n_samples: usize,
    pub n_pairs: usize,
    pub n_correct_pairs: usize,
    pub n_fully_correct_samples: usize,
    pub acc: f64,
    pub acc_plus: f64,
}

impl CategoryStats {
    fn absorb(&mut self, pairs: usize, correct: usize) {
        self.n_samples += 1;
        self.n_pairs += pairs;
        self.n_correct_pairs += correct;
        if correct == pairs {
            self.n_fully_correct_samples += 1;
        }
    }

    fn finalize(&mut self) {
        self.acc = if self.n_pairs > 0 {
            self.n_correct_pairs as f64 / self.n_pairs as f64
        } else {
            0.0
        };
        self.acc_plus = if self.n_samples > 0 {
            self.n_fully_correct_samples as f64 / self.n_samples as f64
        } else {
            0.0
        };
    }
}

/// Benchmark result: agreement per category, overall, and the items that
/// could not be scored because they admit no comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub per_category: BTreeMap<Category, CategoryStats>,
    pub overall: CategoryStats,
    pub zero_pair_item_ids: Vec<String>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("benchmark reports serialize")
    }

    /// One row per category plus an `overall` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,n_samples,n_pairs,acc,acc_plus\n");
        for (category, stats) in &self.per_category {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                category.as_str(),
                stats.n_samples,
                stats.n_pairs,
                stats.acc,
                stats.acc_plus
            ));
        }
        out.push_str(&format!(
            "overall,{},{},{},{}\n",
            self.overall.n_samples, self.overall.n_pairs, self.overall.acc, self.overall.acc_plus
        ));
        out
    }
}

/// Runs the preference benchmark: scores the dataset under `mode`, then
/// counts strict-order agreement with the annotated ranking.
pub fn eval_reward_model(
    rm: &RewardModelParams,
    dataset: &Dataset,
    mode: CritiqueMode,
    max_critique_len: usize,
) -> Result<BenchReport, EvalError> {
    let mut per_category: BTreeMap<Category, CategoryStats> = BTreeMap::new();
    let mut overall = CategoryStats::default();
    let mut zero_pair_item_ids = Vec::new();

    for item in dataset.items() {
        let pair_set = all_pairs(item);
        if pair_set.pairs.is_empty() {
            zero_pair_item_ids.push(item.id.clone());
            continue;
        }
        let query = item.query();
        let mut scores = Vec::with_capacity(item.responses.len());
        for response in &item.responses {
            let score = match mode {
                CritiqueMode::Inferred => {
                    infer(rm, &query, &response.tokens, max_critique_len)?.score
                }
                CritiqueMode::GroundTruth => {
                    score_response(rm, &query, &response.tokens, &response.critique)?
                }
                CritiqueMode::NoCritique => {
                    score_response(rm, &query, &response.tokens, &TokenSeq::empty())?
                }
            };
            scores.push(score);
        }
        let correct = pair_set
            .pairs
            .iter()
            .filter(|p| scores[p.chosen_idx] > scores[p.rejected_idx])
            .count();
        let pairs = pair_set.pairs.len();
        per_category
            .entry(item.category)
            .or_default()
            .absorb(pairs, correct);
        overall.absorb(pairs, correct);
    }

    for stats in per_category.values_mut() {
        stats.finalize();
    }
    overall.finalize();
    Ok(BenchReport {
        per_category,
        overall,
        zero_pair_item_ids,
    })
}

/// Fraction of pairs whose policy/reference log-ratio already prefers the
/// chosen response (strictly — a policy equal to its reference scores 0).
pub fn implicit_reward_accuracy(
    policy: &PolicyParams,
    reference: &FrozenPolicy,
    pairs: &[ComparisonPair],
) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyPairs);
    }
    let mut correct = 0usize;
    for pair in pairs {
        let feats = &pair.query.features;
        let chosen = crate::objective::logratio(policy, reference, feats, &pair.chosen)?;
        let rejected = crate::objective::logratio(policy, reference, feats, &pair.rejected)?;
        if chosen > rejected {
            correct += 1;
        }
    }
    Ok(correct as f64 / pairs.len() as f64)
}
