//! Synthetic-data builders shared by the integration suites.
//!
//! Three families: a planted preference (token 0 beats token 1, always), a
//! margin-stratified variant where low-confidence labels are noisy, and a
//! linearly separable reward problem with quality-correlated critiques.

// Each integration target compiles its own copy and uses its own subset.
#![allow(dead_code)]

use prefalign::data::{
    AnnotatedResponse, Category, Dataset, DimScores, RankedResponseSet, TokenSeq,
};
use prefalign::pairs::ScoreTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PLANTED_VOCAB: usize = 6;

fn scores(helpfulness: f64) -> DimScores {
    DimScores {
        helpfulness,
        faithfulness: helpfulness,
        ethics: 0.0,
    }
}

fn category_for(i: usize) -> Category {
    Category::ALL[i % Category::ALL.len()]
}

fn response(tokens: &[u32], rank: u32, critique: &[u32]) -> AnnotatedResponse {
    AnnotatedResponse {
        model_name: format!("model-{rank}"),
        tokens: TokenSeq::from(tokens),
        rank,
        dim_scores: scores(3.0 - rank as f64),
        critique: TokenSeq::from(critique),
    }
}

/// `n_items` items with one comparison each: token `[0]` (rank 1, critique
/// `[2]`) beats token `[1]` (rank 2, critique `[3]`). Features are random
/// 2-vectors in `[-1, 1]` and carry no label signal. The score table puts
/// the preferred response `1.5` above the other, giving every pair margin
/// `1.5`.
pub fn planted_preference_dataset(n_items: usize, seed: u64) -> (Dataset, ScoreTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = ScoreTable::new();
    let items: Vec<RankedResponseSet> = (0..n_items)
        .map(|i| {
            let id = format!("planted-{i}");
            table.insert(id.clone(), 0, 1.5);
            table.insert(id.clone(), 1, 0.0);
            RankedResponseSet {
                id,
                category: category_for(i),
                features: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                responses: vec![response(&[0], 1, &[2]), response(&[1], 2, &[3])],
            }
        })
        .collect();
    let dataset = Dataset::from_items(items, PLANTED_VOCAB).expect("planted items are valid");
    (dataset, table)
}

/// Margin-stratified planted preference with label noise concentrated in
/// the low-margin half. Even items are "confident": margin
/// `confident_delta`, never mislabeled. Odd items are "uncertain": margin
/// `uncertain_delta`, and with probability `noise` their ranks point the
/// wrong way (token 1 labeled above token 0). The score table always
/// matches the labels, confident or not, so margin magnitude — not
/// correctness — is what separates the strata.
pub fn noisy_margin_dataset(
    n_items: usize,
    confident_delta: f64,
    uncertain_delta: f64,
    noise: f64,
    seed: u64,
) -> (Dataset, ScoreTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = ScoreTable::new();
    let items: Vec<RankedResponseSet> = (0..n_items)
        .map(|i| {
            let id = format!("noisy-{i}");
            let confident = i % 2 == 0;
            let delta = if confident { confident_delta } else { uncertain_delta };
            let flipped = !confident && rng.random_range(0.0..1.0) < noise;
            let (rank_of_zero, rank_of_one) = if flipped { (2, 1) } else { (1, 2) };
            let score_of = |rank: u32| if rank == 1 { delta } else { 0.0 };
            table.insert(id.clone(), 0, score_of(rank_of_zero));
            table.insert(id.clone(), 1, score_of(rank_of_one));
            RankedResponseSet {
                id,
                category: category_for(i),
                features: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                responses: vec![
                    response(&[0], rank_of_zero, &[2]),
                    response(&[1], rank_of_one, &[3]),
                ],
            }
        })
        .collect();
    let dataset = Dataset::from_items(items, PLANTED_VOCAB).expect("noisy items are valid");
    (dataset, table)
}

/// A linearly separable reward problem. Each item ranks three responses
/// whose quality is exactly their share of token 0 (`[0,0]` over `[0,1]`
/// over `[1,1]`), so a scoring head with positive weight on token 0's
/// bag entry orders every pair correctly. Critiques correlate with
/// quality: better responses earn more token-2s, worse more token-3s.
pub fn separable_reward_dataset(n_items: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<RankedResponseSet> = (0..n_items)
        .map(|i| {
            RankedResponseSet {
                id: format!("sep-{i}"),
                category: category_for(i),
                features: vec![rng.random_range(-1.0..1.0)],
                responses: vec![
                    response(&[0, 0], 1, &[2, 2]),
                    response(&[0, 1], 2, &[2, 3]),
                    response(&[1, 1], 3, &[3, 3]),
                ],
            }
        })
        .collect();
    Dataset::from_items(items, PLANTED_VOCAB).expect("separable items are valid")
}

/// Splits a dataset's items into `(first, rest)` at `n`, preserving order
/// and vocabulary.
pub fn split_items(dataset: &Dataset, n: usize) -> (Dataset, Dataset) {
    let items = dataset.items();
    assert!(n < items.len(), "split leaves nothing behind");
    let head = Dataset::from_items(items[..n].to_vec(), dataset.vocab_size())
        .expect("head split is valid");
    let tail = Dataset::from_items(items[n..].to_vec(), dataset.vocab_size())
        .expect("tail split is valid");
    (head, tail)
}
