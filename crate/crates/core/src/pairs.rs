//! Preference pairs: the training currency.
//!
//! A ranked response set yields one [`ComparisonPair`] per unordered pair of
//! responses with strictly differing ranks (smaller rank preferred); tied
//! ranks yield nothing. Pairs then pick up a reward margin `δ` from a score
//! table, and optionally a perturbed query (feature-space mixup with another
//! query) used as the negative-side conditioning by the vision-negative
//! objective. Pairs can also be built without annotations by sampling a
//! policy and keeping its best-vs-worst scored responses.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{QueryFeatures, RankedResponseSet, TokenSeq};
use crate::policy::{sample_with_rng, PolicyError, PolicyParams};

#[derive(Debug, Error)]
pub enum PairError {
    #[error("no reward score for response {response_idx} of query {query_id:?}")]
    MissingScore {
        query_id: String,
        response_idx: usize,
    },
    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("mixup alpha must lie in [0, 1], got {alpha}")]
    InvalidAlpha { alpha: f64 },
    #[error("self-sampling needs at least 2 samples, got {n_samples}")]
    TooFewSamples { n_samples: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// One preference comparison: a query, the preferred and rejected response,
/// the reward margin, and an optional perturbed query for vision negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonPair {
    pub query: QueryFeatures,
    pub chosen: TokenSeq,
    pub rejected: TokenSeq,
    /// Index of the preferred response in its source response list (or the
    /// sample number for self-sampled pairs).
    pub chosen_idx: usize,
    pub rejected_idx: usize,
    /// Reward margin `δ = r(chosen) − r(rejected)`; 0 until margins are
    /// attached.
    pub margin: f64,
    pub vision_query: Option<QueryFeatures>,
}

/// Pairs extracted from one source, with a degeneracy diagnostic: `true`
/// when the source admitted no comparison at all (all ranks tied, or all
/// self-sample scores equal).
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub pairs: Vec<ComparisonPair>,
    pub degenerate: bool,
}

/// Every comparison pair of a ranked set, in deterministic `(i, j)` index
/// order (`i < j`). The smaller rank becomes `chosen`; equal ranks produce
/// no pair. A set whose ranks are all equal returns no pairs and sets the
/// degeneracy flag.
pub fn all_pairs(set: &RankedResponseSet) -> PairSet {
    let n = set.responses.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (ri, rj) = (set.responses[i].rank, set.responses[j].rank);
            if ri == rj {
                continue;
            }
            let (chosen_idx, rejected_idx) = if ri < rj { (i, j) } else { (j, i) };
            pairs.push(ComparisonPair {
                query: set.query(),
                chosen: set.responses[chosen_idx].tokens.clone(),
                rejected: set.responses[rejected_idx].tokens.clone(),
                chosen_idx,
                rejected_idx,
                margin: 0.0,
                vision_query: None,
            });
        }
    }
    let degenerate = pairs.is_empty() && !set.responses.is_empty();
    PairSet { pairs, degenerate }
}

/// Reward scores keyed by `(query id, response index)` — the lookup table
/// behind margin attachment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    scores: HashMap<(String, usize), f64>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: impl Into<String>, response_idx: usize, score: f64) {
        self.scores.insert((query_id.into(), response_idx), score);
    }

    pub fn get(&self, query_id: &str, response_idx: usize) -> Option<f64> {
        self.scores
            .get(&(query_id.to_string(), response_idx))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Sets every pair's margin to `r(chosen) − r(rejected)` from the score
/// table. Pairs are otherwise untouched; a missing score is an error.
pub fn attach_margins(pairs: &mut [ComparisonPair], scores: &ScoreTable) -> Result<(), PairError> {
    for pair in pairs.iter_mut() {
        let lookup = |idx: usize| {
            scores
                .get(&pair.query.id, idx)
                .ok_or_else(|| PairError::MissingScore {
                    query_id: pair.query.id.clone(),
                    response_idx: idx,
                })
        };
        let chosen = lookup(pair.chosen_idx)?;
        let rejected = lookup(pair.rejected_idx)?;
        pair.margin = chosen - rejected;
    }
    Ok(())
}

/// Feature-space mixup of two queries: `alpha·x + (1−alpha)·x_other`. The
/// result inherits `x`'s category and carries its id suffixed with `#mix`.
pub fn mixup_query(
    x: &QueryFeatures,
    x_other: &QueryFeatures,
    alpha: f64,
) -> Result<QueryFeatures, PairError> {
    if x.features.len() != x_other.features.len() {
        return Err(PairError::DimensionMismatch {
            left: x.features.len(),
            right: x_other.features.len(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PairError::InvalidAlpha { alpha });
    }
    let features = x
        .features
        .iter()
        .zip(&x_other.features)
        .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
        .collect();
    Ok(QueryFeatures {
        id: format!("{}#mix", x.id),
        category: x.category,
        features,
    })
}

/// Gives every pair a perturbed query by mixing it with the next pair's
/// query, cyclically. Deterministic; a single pair mixes with itself (which
/// reproduces its own features at any alpha).
pub fn attach_vision_negatives(pairs: &mut [ComparisonPair], alpha: f64) -> Result<(), PairError> {
    let queries: Vec<QueryFeatures> = pairs.iter().map(|p| p.query.clone()).collect();
    let n = pairs.len();
    for (i, pair) in pairs.iter_mut().enumerate() {
        let partner = &queries[(i + 1) % n];
        pair.vision_query = Some(mixup_query(&queries[i], partner, alpha)?);
    }
    Ok(())
}

/// Controls self-sampled pair construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSampleConfig {
    /// How many responses to draw from the policy. Default 8.
    pub n_samples: usize,
    pub max_len: usize,
    pub temperature: f64,
}

impl Default for SelfSampleConfig {
    fn default() -> Self {
        SelfSampleConfig {
            n_samples: 8,
            max_len: 16,
            temperature: 1.0,
        }
    }
}

/// Draws `n_samples` responses from the policy conditioned on the query,
/// scores each with `reward`, and emits the single extreme pair
/// (argmax-score vs argmin-score) with `δ` = score gap. If every sample
/// scores identically the result is empty and flagged degenerate.
/// Deterministic for a given seed; `chosen_idx`/`rejected_idx` are sample
/// numbers.
pub fn self_pairs<F>(
    policy: &PolicyParams,
    query: &QueryFeatures,
    cfg: &SelfSampleConfig,
    reward: F,
    seed: u64,
) -> Result<PairSet, PairError>
where
    F: Fn(&TokenSeq) -> f64,
{
    if cfg.n_samples < 2 {
        return Err(PairError::TooFewSamples {
            n_samples: cfg.n_samples,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        let seq = sample_with_rng(
            policy,
            &query.features,
            cfg.max_len,
            cfg.temperature,
            &mut rng,
        )?;
        let score = reward(&seq);
        samples.push((seq, score));
    }
    // First-index argmax / argmin keep the choice deterministic under ties.
    let mut best = 0usize;
    let mut worst = 0usize;
    for (i, (_, score)) in samples.iter().enumerate() {
        if *score > samples[best].1 {
            best = i;
        }
        if *score < samples[worst].1 {
            worst = i;
        }
    }
    if samples[best].1 == samples[worst].1 {
        return Ok(PairSet {
            pairs: Vec::new(),
            degenerate: true,
        });
    }
    let margin = samples[best].1 - samples[worst].1;
    let pair = ComparisonPair {
        query: query.clone(),
        chosen: samples[best].0.clone(),
        rejected: samples[worst].0.clone(),
        chosen_idx: best,
        rejected_idx: worst,
        margin,
        vision_query: None,
    };
    Ok(PairSet {
        pairs: vec![pair],
        degenerate: false,
    })
}

/// One line of the pairs dump artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub query_id: String,
    pub chosen_idx: u32,
    pub rejected_idx: u32,
    pub delta: f64,
    /// Whether a perturbed query is attached.
    pub vision: bool,
}

impl PairRecord {
    pub fn from_pair(pair: &ComparisonPair) -> Self {
        PairRecord {
            query_id: pair.query.id.clone(),
            chosen_idx: pair.chosen_idx as u32,
            rejected_idx: pair.rejected_idx as u32,
            delta: pair.margin,
            vision: pair.vision_query.is_some(),
        }
    }
}

/// Canonical JSONL serialization of a pairs dump, one record per line.
pub fn pair_records_to_jsonl(pairs: &[ComparisonPair]) -> String {
    let mut out = String::new();
    for pair in pairs {
        let record = PairRecord::from_pair(pair);
        out.push_str(&serde_json::to_string(&record).expect("pair records serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AnnotatedResponse, Category, DimScores};

    fn response(tokens: &[u32], rank: u32) -> AnnotatedResponse {
        AnnotatedResponse {
            model_name: format!("m{rank}"),
            tokens: TokenSeq::from(tokens),
            rank,
            dim_scores: DimScores {
                helpfulness: 0.0,
                faithfulness: 0.0,
                ethics: 0.0,
            },
            critique: TokenSeq::empty(),
        }
    }

    fn set_with_ranks(ranks: &[u32]) -> RankedResponseSet {
        RankedResponseSet {
            id: "q".to_string(),
            category: Category::Long,
            features: vec![1.0, 2.0],
            responses: ranks
                .iter()
                .enumerate()
                .map(|(i, &r)| response(&[i as u32], r))
                .collect(),
        }
    }

    /// Independent oracle: count index pairs with differing ranks directly.
    fn brute_force_pair_count(ranks: &[u32]) -> usize {
        let mut count = 0;
        for i in 0..ranks.len() {
            for j in (i + 1)..ranks.len() {
                if ranks[i] != ranks[j] {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn distinct_ranks_give_all_unordered_pairs() {
        let out = all_pairs(&set_with_ranks(&[1, 2, 3, 4]));
        assert_eq!(out.pairs.len(), 6);
        assert!(!out.degenerate);
        // Deterministic (i, j) order and correct chosen side.
        let idx: Vec<(usize, usize)> = out
            .pairs
            .iter()
            .map(|p| (p.chosen_idx, p.rejected_idx))
            .collect();
        assert_eq!(idx, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn ties_produce_no_pair() {
        let out = all_pairs(&set_with_ranks(&[1, 1, 2]));
        assert_eq!(out.pairs.len(), 2);
        for p in &out.pairs {
            assert_eq!(p.rejected_idx, 2, "only the rank-2 response loses");
        }
        let tied = all_pairs(&set_with_ranks(&[2, 2]));
        assert!(tied.pairs.is_empty());
        assert!(tied.degenerate);
    }

    #[test]
    fn chosen_is_always_the_smaller_rank() {
        let out = all_pairs(&set_with_ranks(&[3, 1]));
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.pairs[0].chosen_idx, 1);
        assert_eq!(out.pairs[0].rejected_idx, 0);
        assert_eq!(out.pairs[0].margin, 0.0, "margin unset until attached");
    }

    #[test]
    fn pair_count_law_holds_on_random_rank_multisets() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(2..=8usize);
            let ranks: Vec<u32> = (0..n).map(|_| rng.random_range(1..=4u32)).collect();
            let got = all_pairs(&set_with_ranks(&ranks)).pairs.len();
            // C(n,2) − Σ C(g_i,2) over tie groups.
            let mut group_sizes: HashMap<u32, usize> = HashMap::new();
            for &r in &ranks {
                *group_sizes.entry(r).or_insert(0) += 1;
            }
            let c2 = |m: usize| m * m.saturating_sub(1) / 2;
            let law = c2(n) - group_sizes.values().map(|&g| c2(g)).sum::<usize>();
            assert_eq!(got, law);
            assert_eq!(got, brute_force_pair_count(&ranks));
        }
    }

    #[test]
    fn swapping_response_positions_preserves_pair_content() {
        let mut set = set_with_ranks(&[1, 3, 2, 3]);
        let content = |s: &RankedResponseSet| {
            let mut pairs: Vec<(Vec<u32>, Vec<u32>)> = all_pairs(s)
                .pairs
                .into_iter()
                .map(|p| (p.chosen.as_slice().to_vec(), p.rejected.as_slice().to_vec()))
                .collect();
            pairs.sort();
            pairs
        };
        let before = content(&set);
        set.responses.swap(0, 2);
        set.responses.swap(1, 3);
        assert_eq!(content(&set), before);
    }

    #[test]
    fn margins_attach_and_negate_under_exchange() {
        let set = set_with_ranks(&[1, 2]);
        let mut out = all_pairs(&set);
        let mut table = ScoreTable::new();
        table.insert("q", 0, 2.0);
        table.insert("q", 1, 0.5);
        attach_margins(&mut out.pairs, &table).unwrap();
        assert_eq!(out.pairs[0].margin, 1.5);

        // Manually exchange chosen/rejected: the margin flips sign.
        let mut swapped = out.pairs.clone();
        let first = &mut swapped[0];
        std::mem::swap(&mut first.chosen_idx, &mut first.rejected_idx);
        std::mem::swap(&mut first.chosen, &mut first.rejected);
        attach_margins(&mut swapped, &table).unwrap();
        assert_eq!(swapped[0].margin, -1.5);

        // Equal scores give a zero margin.
        let mut even = ScoreTable::new();
        even.insert("q", 0, 1.0);
        even.insert("q", 1, 1.0);
        attach_margins(&mut out.pairs, &even).unwrap();
        assert_eq!(out.pairs[0].margin, 0.0);
    }

    #[test]
    fn missing_score_is_a_lookup_error() {
        let set = set_with_ranks(&[1, 2]);
        let mut out = all_pairs(&set);
        let mut table = ScoreTable::new();
        table.insert("q", 0, 2.0);
        match attach_margins(&mut out.pairs, &table) {
            Err(PairError::MissingScore {
                query_id,
                response_idx,
            }) => {
                assert_eq!(query_id, "q");
                assert_eq!(response_idx, 1);
            }
            other => panic!("expected missing-score error, got {other:?}"),
        }
    }

    fn query(id: &str, features: &[f64]) -> QueryFeatures {
        QueryFeatures {
            id: id.to_string(),
            category: Category::Video,
            features: features.to_vec(),
        }
    }

    #[test]
    fn mixup_identity_midpoint_and_linearity() {
        let x = query("a", &[2.0, 0.0]);
        let other = query("b", &[0.0, 2.0]);

        let same = mixup_query(&x, &other, 1.0).unwrap();
        assert_eq!(same.features, x.features);
        assert_eq!(same.id, "a#mix");
        assert_eq!(same.category, x.category);

        let mid = mixup_query(&x, &other, 0.5).unwrap();
        assert_eq!(mid.features, vec![1.0, 1.0]);

        // mixup(a) + mixup(1−a) = x + x_other elementwise.
        for alpha in [0.0, 0.25, 0.7] {
            let m1 = mixup_query(&x, &other, alpha).unwrap();
            let m2 = mixup_query(&x, &other, 1.0 - alpha).unwrap();
            for i in 0..2 {
                let sum = m1.features[i] + m2.features[i];
                assert!((sum - (x.features[i] + other.features[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixup_rejects_bad_inputs() {
        let x = query("a", &[1.0, 2.0]);
        let short = query("b", &[1.0]);
        assert!(matches!(
            mixup_query(&x, &short, 0.5),
            Err(PairError::DimensionMismatch { left: 2, right: 1 })
        ));
        let other = query("b", &[0.0, 0.0]);
        assert!(matches!(
            mixup_query(&x, &other, 1.5),
            Err(PairError::InvalidAlpha { .. })
        ));
        assert!(matches!(
            mixup_query(&x, &other, -0.1),
            Err(PairError::InvalidAlpha { .. })
        ));
    }

    #[test]
    fn vision_negatives_mix_cyclically() {
        let mut pairs = Vec::new();
        for (id, f) in [("a", [0.0, 0.0]), ("b", [2.0, 2.0]), ("c", [4.0, 8.0])] {
            pairs.push(ComparisonPair {
                query: query(id, &f),
                chosen: TokenSeq::from(&[0u32][..]),
                rejected: TokenSeq::from(&[1u32][..]),
                chosen_idx: 0,
                rejected_idx: 1,
                margin: 0.0,
                vision_query: None,
            });
        }
        attach_vision_negatives(&mut pairs, 0.5).unwrap();
        assert_eq!(pairs[0].vision_query.as_ref().unwrap().features, vec![1.0, 1.0]);
        assert_eq!(pairs[1].vision_query.as_ref().unwrap().features, vec![3.0, 5.0]);
        // Last wraps around to the first.
        assert_eq!(pairs[2].vision_query.as_ref().unwrap().features, vec![2.0, 4.0]);
        assert_eq!(pairs[0].vision_query.as_ref().unwrap().id, "a#mix");
    }

    #[test]
    fn self_pairs_picks_the_extreme_samples_by_reward() {
        // Uniform policy over 6 ids; reward = sequence length. The chosen
        // response must be the longest drawn sample, the rejected the
        // shortest — verified against a brute-force scan of the same draws.
        let policy = PolicyParams::zeros(6, 2);
        let q = query("q", &[0.0, 0.0]);
        let cfg = SelfSampleConfig {
            n_samples: 8,
            max_len: 10,
            temperature: 1.0,
        };
        let out = self_pairs(&policy, &q, &cfg, |seq| seq.len() as f64, 31).unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert!(!out.degenerate);
        let pair = &out.pairs[0];

        // Re-draw the identical sample stream and scan it.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut drawn = Vec::new();
        for _ in 0..8 {
            drawn.push(sample_with_rng(&policy, &q.features, 10, 1.0, &mut rng).unwrap());
        }
        let longest = drawn.iter().map(TokenSeq::len).max().unwrap();
        let shortest = drawn.iter().map(TokenSeq::len).min().unwrap();
        assert_eq!(pair.chosen.len(), longest);
        assert_eq!(pair.rejected.len(), shortest);
        assert_eq!(pair.margin, (longest - shortest) as f64);
        assert_eq!(&drawn[pair.chosen_idx], &pair.chosen);
        assert_eq!(&drawn[pair.rejected_idx], &pair.rejected);
    }

    #[test]
    fn self_pairs_is_deterministic_and_degenerates_on_constant_scores() {
        let mut forced = PolicyParams::zeros(3, 1);
        // Force immediate EOS: every sample is exactly [2].
        let flat_len = forced.param_count();
        let mut flat = vec![0.0; flat_len];
        flat[2] = 40.0; // start logit of EOS
        forced = PolicyParams::from_flat(3, 1, &flat).unwrap();
        let q = query("q", &[0.0]);
        let cfg = SelfSampleConfig::default();
        assert_eq!(cfg.n_samples, 8);
        let out = self_pairs(&forced, &q, &cfg, |seq| seq.len() as f64, 7).unwrap();
        assert!(out.pairs.is_empty());
        assert!(out.degenerate);

        let policy = PolicyParams::zeros(6, 1);
        let q2 = query("q2", &[0.5]);
        let a = self_pairs(&policy, &q2, &cfg, |s| s.len() as f64, 42).unwrap();
        let b = self_pairs(&policy, &q2, &cfg, |s| s.len() as f64, 42).unwrap();
        assert_eq!(a, b);

        assert!(matches!(
            self_pairs(
                &policy,
                &q2,
                &SelfSampleConfig {
                    n_samples: 1,
                    ..cfg
                },
                |s| s.len() as f64,
                1
            ),
            Err(PairError::TooFewSamples { n_samples: 1 })
        ));
    }

    #[test]
    fn pair_records_serialize_one_line_each() {
        let set = set_with_ranks(&[1, 2]);
        let mut out = all_pairs(&set);
        out.pairs[0].margin = 1.25;
        let jsonl = pair_records_to_jsonl(&out.pairs);
        assert_eq!(
            jsonl,
            "{\"query_id\":\"q\",\"chosen_idx\":0,\"rejected_idx\":1,\"delta\":1.25,\"vision\":false}\n"
        );
        let parsed: PairRecord = serde_json::from_str(jsonl.trim()).unwrap();
        assert_eq!(parsed, PairRecord::from_pair(&out.pairs[0]));
    }
}
