//! Critique-conditioned reward model.
//!
//! Two heads over one parameter vector. The critique head is a conditional
//! sequence model that writes a critique of a response: it reuses the
//! bigram policy machinery, conditioned on the query features concatenated
//! with a bag encoding of the response. The scoring head is linear over
//!
//! ```text
//! φ(y, c, x) = [bag(y); bag(c); x; 1]
//! r(x, y, c) = w · φ(y, c, x)
//! ```
//!
//! where `bag` is the mean one-hot encoding of a token sequence (all zeros
//! for an empty one).
//!
//! Training couples the heads with one joint objective per comparison
//! batch: the mean critique negative log-likelihood over both sides of
//! every pair (teacher-forced on annotated critiques, with the terminal id
//! appended so the head learns to stop) plus the mean pairwise scoring
//! loss `softplus(−(r_w − r_l))`, each side scored with its annotated
//! critique. Batches are built from [`RewardPairExample`], which can only
//! be constructed from annotated responses — so training can never feed
//! the scoring head a critique the model wrote itself. At inference the
//! model first writes a critique greedily, then scores conditioned on it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{AnnotatedResponse, QueryFeatures, RankedResponseSet, TokenSeq};
use crate::num::{sigmoid, softplus};
use crate::pairs::{all_pairs, ScoreTable};
use crate::policy::{greedy_decode, logprob_grad, Gradient, PolicyError, PolicyParams};

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("cannot score an empty response")]
    EmptyResponse,
    #[error("annotated example for query {query_id:?} is missing a critique")]
    EmptyCritique { query_id: String },
    #[error("chosen rank {chosen} must beat rejected rank {rejected}")]
    RankOrder { chosen: u32, rejected: u32 },
    #[error("cannot evaluate a loss over an empty example batch")]
    EmptyBatch,
    #[error("{what}: expected length {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("score record line {line}: {source}")]
    Record {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Parameters of both heads. The flat layout is the critique head in its
/// canonical order followed by the scoring weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModelParams {
    vocab_size: usize,
    feature_dim: usize,
    critique_head: PolicyParams,
    score_weights: Vec<f64>,
}

impl RewardModelParams {
    /// All-zero parameters: the critique head is uniform and every score
    /// is 0.
    pub fn zeros(vocab_size: usize, feature_dim: usize) -> Self {
        RewardModelParams {
            vocab_size,
            feature_dim,
            critique_head: PolicyParams::zeros(vocab_size, feature_dim + vocab_size),
            score_weights: vec![0.0; 2 * vocab_size + feature_dim + 1],
        }
    }

    /// Seeded Gaussian initialization. The critique head draws on the
    /// seed's default stream, the scoring weights on stream 1, so the two
    /// blocks are decorrelated but jointly reproducible.
    pub fn random_init(vocab_size: usize, feature_dim: usize, std_dev: f64, seed: u64) -> Self {
        let critique_head =
            PolicyParams::random_init(vocab_size, feature_dim + vocab_size, std_dev, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let normal = Normal::new(0.0, std_dev).expect("valid std deviation");
        let score_weights = (0..2 * vocab_size + feature_dim + 1)
            .map(|_| normal.sample(&mut rng))
            .collect();
        RewardModelParams {
            vocab_size,
            feature_dim,
            critique_head,
            score_weights,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn critique_head(&self) -> &PolicyParams {
        &self.critique_head
    }

    pub fn param_count(&self) -> usize {
        self.critique_head.param_count() + self.score_weights.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.critique_head.to_flat();
        flat.extend_from_slice(&self.score_weights);
        flat
    }

    pub fn from_flat(
        vocab_size: usize,
        feature_dim: usize,
        flat: &[f64],
    ) -> Result<Self, RewardError> {
        let head_len = PolicyParams::zeros(vocab_size, feature_dim + vocab_size).param_count();
        let score_len = 2 * vocab_size + feature_dim + 1;
        if flat.len() != head_len + score_len {
            return Err(RewardError::Shape {
                what: "flat reward parameters",
                expected: head_len + score_len,
                got: flat.len(),
            });
        }
        let critique_head =
            PolicyParams::from_flat(vocab_size, feature_dim + vocab_size, &flat[..head_len])?;
        Ok(RewardModelParams {
            vocab_size,
            feature_dim,
            critique_head,
            score_weights: flat[head_len..].to_vec(),
        })
    }

    /// One plain gradient-descent step over both heads.
    pub fn apply_step(&mut self, grad: &Gradient, learning_rate: f64) {
        assert_eq!(
            grad.len(),
            self.param_count(),
            "gradient length {} does not match parameter count {}",
            grad.len(),
            self.param_count()
        );
        let head_len = self.critique_head.param_count();
        let (head, score) = grad.as_slice().split_at(head_len);
        self.critique_head
            .apply_step(&Gradient::from_vec(head.to_vec()), learning_rate);
        for (w, g) in self.score_weights.iter_mut().zip(score) {
            *w -= learning_rate * g;
        }
    }

    /// Mean one-hot encoding over the vocabulary; zeros for an empty
    /// sequence.
    fn bag(&self, seq: &TokenSeq) -> Result<Vec<f64>, RewardError> {
        let mut counts = vec![0.0; self.vocab_size];
        if seq.is_empty() {
            return Ok(counts);
        }
        for &id in seq.iter() {
            if id as usize >= self.vocab_size {
                return Err(PolicyError::TokenOutOfRange {
                    id,
                    vocab_size: self.vocab_size,
                }
                .into());
            }
            counts[id as usize] += 1.0;
        }
        let inv = 1.0 / seq.len() as f64;
        for c in &mut counts {
            *c *= inv;
        }
        Ok(counts)
    }

    /// Conditioning vector of the critique head: `[x; bag(y)]`.
    fn critique_condition(
        &self,
        query: &QueryFeatures,
        y: &TokenSeq,
    ) -> Result<Vec<f64>, RewardError> {
        if query.features.len() != self.feature_dim {
            return Err(RewardError::Shape {
                what: "query features",
                expected: self.feature_dim,
                got: query.features.len(),
            });
        }
        if y.is_empty() {
            return Err(RewardError::EmptyResponse);
        }
        let mut cond = query.features.clone();
        cond.extend(self.bag(y)?);
        Ok(cond)
    }

    /// Scoring features `φ = [bag(y); bag(c); x; 1]`.
    fn phi(
        &self,
        query: &QueryFeatures,
        y: &TokenSeq,
        critique: &TokenSeq,
    ) -> Result<Vec<f64>, RewardError> {
        if query.features.len() != self.feature_dim {
            return Err(RewardError::Shape {
                what: "query features",
                expected: self.feature_dim,
                got: query.features.len(),
            });
        }
        if y.is_empty() {
            return Err(RewardError::EmptyResponse);
        }
        let mut phi = self.bag(y)?;
        phi.extend(self.bag(critique)?);
        phi.extend_from_slice(&query.features);
        phi.push(1.0);
        Ok(phi)
    }

    /// Critique-head teacher target: the critique with the terminal id
    /// appended, so the head also learns where to stop.
    fn critique_target(&self, critique: &TokenSeq) -> TokenSeq {
        let mut tokens: Vec<u32> = critique.iter().copied().collect();
        tokens.push(self.critique_head.eos_id());
        TokenSeq::new(tokens)
    }
}

/// Scalar reward of a response given a critique (which may be empty — the
/// critique-free ablation scores exactly this way).
pub fn score_response(
    rm: &RewardModelParams,
    query: &QueryFeatures,
    y: &TokenSeq,
    critique: &TokenSeq,
) -> Result<f64, RewardError> {
    let phi = rm.phi(query, y, critique)?;
    Ok(phi.iter().zip(&rm.score_weights).map(|(p, w)| p * w).sum())
}

/// Teacher-forced critique negative log-likelihood for one `(query, y,
/// critique)` triple, with the gradient in full parameter layout (the
/// scoring block is zero).
pub fn critique_loss(
    rm: &RewardModelParams,
    query: &QueryFeatures,
    y: &TokenSeq,
    critique: &TokenSeq,
) -> Result<(f64, Gradient), RewardError> {
    let cond = rm.critique_condition(query, y)?;
    let target = rm.critique_target(critique);
    let (lp, head_grad) = logprob_grad(&rm.critique_head, &cond, &target)?;
    let mut grad = head_grad;
    grad.scale(-1.0);
    let full = Gradient::concat(&grad, &Gradient::zeros(rm.score_weights.len()));
    Ok((-lp, full))
}

/// Pairwise scoring loss `softplus(−(r_w − r_l))` with both sides scored
/// under their given critiques; gradient in full parameter layout (the
/// critique block is zero).
pub fn scoring_loss(
    rm: &RewardModelParams,
    query: &QueryFeatures,
    chosen: &TokenSeq,
    chosen_critique: &TokenSeq,
    rejected: &TokenSeq,
    rejected_critique: &TokenSeq,
) -> Result<(f64, Gradient), RewardError> {
    let phi_w = rm.phi(query, chosen, chosen_critique)?;
    let phi_l = rm.phi(query, rejected, rejected_critique)?;
    let r_w: f64 = phi_w.iter().zip(&rm.score_weights).map(|(p, w)| p * w).sum();
    let r_l: f64 = phi_l.iter().zip(&rm.score_weights).map(|(p, w)| p * w).sum();
    let gap = r_w - r_l;
    let loss = softplus(-gap);
    let coeff = -sigmoid(-gap);
    let score_grad: Vec<f64> = phi_w
        .iter()
        .zip(&phi_l)
        .map(|(w, l)| coeff * (w - l))
        .collect();
    let full = Gradient::concat(
        &Gradient::zeros(rm.critique_head.param_count()),
        &Gradient::from_vec(score_grad),
    );
    Ok((loss, full))
}

/// One comparison with annotated critiques on both sides. Constructible
/// only from annotated responses, which is what guarantees the scoring
/// head always trains against human critiques rather than its own output.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardPairExample {
    query: QueryFeatures,
    chosen: TokenSeq,
    chosen_critique: TokenSeq,
    rejected: TokenSeq,
    rejected_critique: TokenSeq,
}

impl RewardPairExample {
    pub fn from_annotations(
        query: QueryFeatures,
        chosen: &AnnotatedResponse,
        rejected: &AnnotatedResponse,
    ) -> Result<Self, RewardError> {
        if chosen.rank >= rejected.rank {
            return Err(RewardError::RankOrder {
                chosen: chosen.rank,
                rejected: rejected.rank,
            });
        }
        if chosen.tokens.is_empty() || rejected.tokens.is_empty() {
            return Err(RewardError::EmptyResponse);
        }
        if chosen.critique.is_empty() || rejected.critique.is_empty() {
            return Err(RewardError::EmptyCritique {
                query_id: query.id.clone(),
            });
        }
        Ok(RewardPairExample {
            query,
            chosen: chosen.tokens.clone(),
            chosen_critique: chosen.critique.clone(),
            rejected: rejected.tokens.clone(),
            rejected_critique: rejected.critique.clone(),
        })
    }

    pub fn query(&self) -> &QueryFeatures {
        &self.query
    }

    pub fn chosen(&self) -> &TokenSeq {
        &self.chosen
    }

    pub fn chosen_critique(&self) -> &TokenSeq {
        &self.chosen_critique
    }

    pub fn rejected(&self) -> &TokenSeq {
        &self.rejected
    }

    pub fn rejected_critique(&self) -> &TokenSeq {
        &self.rejected_critique
    }
}

/// All comparison examples of one ranked set, in the same deterministic
/// order as pair extraction. Sets whose ranks are all tied contribute
/// nothing.
pub fn pair_examples(set: &RankedResponseSet) -> Result<Vec<RewardPairExample>, RewardError> {
    all_pairs(set)
        .pairs
        .into_iter()
        .map(|p| {
            RewardPairExample::from_annotations(
                set.query(),
                &set.responses[p.chosen_idx],
                &set.responses[p.rejected_idx],
            )
        })
        .collect()
}

/// A joint-loss evaluation: total value, its two components, and the
/// gradient over both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardReport {
    pub value: f64,
    /// Mean critique negative log-likelihood over both sides of every pair.
    pub critique_term: f64,
    /// Mean pairwise scoring loss.
    pub scoring_term: f64,
    pub grad: Gradient,
}

/// Joint training loss: mean critique NLL over the `2N` critiques plus the
/// mean scoring loss over the `N` pairs. Accumulation runs in ascending
/// example order (chosen critique, rejected critique, then the scoring
/// term) so a given batch always reduces identically.
pub fn total_loss(
    rm: &RewardModelParams,
    batch: &[RewardPairExample],
) -> Result<RewardReport, RewardError> {
    if batch.is_empty() {
        return Err(RewardError::EmptyBatch);
    }
    let mut crit_sum = 0.0;
    let mut crit_grad = Gradient::zeros(rm.param_count());
    let mut score_sum = 0.0;
    let mut score_grad = Gradient::zeros(rm.param_count());
    for ex in batch {
        let (a, ga) = critique_loss(rm, &ex.query, &ex.chosen, &ex.chosen_critique)?;
        crit_sum += a;
        crit_grad.add_scaled(&ga, 1.0);
        let (b, gb) = critique_loss(rm, &ex.query, &ex.rejected, &ex.rejected_critique)?;
        crit_sum += b;
        crit_grad.add_scaled(&gb, 1.0);
        let (s, gs) = scoring_loss(
            rm,
            &ex.query,
            &ex.chosen,
            &ex.chosen_critique,
            &ex.rejected,
            &ex.rejected_critique,
        )?;
        score_sum += s;
        score_grad.add_scaled(&gs, 1.0);
    }
    let n = batch.len() as f64;
    let critique_term = crit_sum / (2.0 * n);
    let scoring_term = score_sum / n;
    crit_grad.scale(1.0 / (2.0 * n));
    score_grad.scale(1.0 / n);
    crit_grad.add_scaled(&score_grad, 1.0);
    Ok(RewardReport {
        value: critique_term + scoring_term,
        critique_term,
        scoring_term,
        grad: crit_grad,
    })
}

/// Critique-free ablation of the training loss: the scoring term alone,
/// with every critique bag zeroed. The critique head receives no gradient
/// and the critiques of the batch are never read.
pub fn plain_batch_loss(
    rm: &RewardModelParams,
    batch: &[RewardPairExample],
) -> Result<RewardReport, RewardError> {
    if batch.is_empty() {
        return Err(RewardError::EmptyBatch);
    }
    let empty = TokenSeq::empty();
    let mut score_sum = 0.0;
    let mut score_grad = Gradient::zeros(rm.param_count());
    for ex in batch {
        let (s, gs) = scoring_loss(rm, &ex.query, &ex.chosen, &empty, &ex.rejected, &empty)?;
        score_sum += s;
        score_grad.add_scaled(&gs, 1.0);
    }
    let n = batch.len() as f64;
    let scoring_term = score_sum / n;
    score_grad.scale(1.0 / n);
    Ok(RewardReport {
        value: scoring_term,
        critique_term: 0.0,
        scoring_term,
        grad: score_grad,
    })
}

/// A response with the critique the model wrote for it and the resulting
/// score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredResponse {
    pub response: TokenSeq,
    pub critique: TokenSeq,
    pub score: f64,
}

/// Critique-then-score inference: greedily decode a critique of `y`
/// (capped at `max_len` tokens, terminal id stripped), then score `y`
/// conditioned on it.
pub fn infer(
    rm: &RewardModelParams,
    query: &QueryFeatures,
    y: &TokenSeq,
    max_len: usize,
) -> Result<ScoredResponse, RewardError> {
    let cond = rm.critique_condition(query, y)?;
    let decoded = greedy_decode(&rm.critique_head, &cond, max_len)?;
    let mut tokens: Vec<u32> = decoded.iter().copied().collect();
    if tokens.last() == Some(&rm.critique_head.eos_id()) {
        tokens.pop();
    }
    let critique = TokenSeq::new(tokens);
    let score = score_response(rm, query, y, &critique)?;
    Ok(ScoredResponse {
        response: y.clone(),
        critique,
        score,
    })
}

/// One line of the scores artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub query_id: String,
    pub response_idx: u32,
    pub critique_tokens: TokenSeq,
    pub score: f64,
}

/// Canonical JSONL serialization of score records, one per line.
pub fn score_records_to_jsonl(records: &[ScoreRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("score records serialize"));
        out.push('\n');
    }
    out
}

/// Parses a scores artifact; blank lines are skipped, errors carry the
/// 1-based line number.
pub fn score_records_from_jsonl(text: &str) -> Result<Vec<ScoreRecord>, RewardError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|source| RewardError::Record {
            line: i + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Collects score records into the lookup table that margin attachment
/// reads.
pub fn score_table(records: &[ScoreRecord]) -> ScoreTable {
    let mut table = ScoreTable::new();
    for r in records {
        table.insert(r.query_id.clone(), r.response_idx as usize, r.score);
    }
    table
}
