//! Emits a small synthetic ranked-response dataset as JSONL on stdout.
//!
//! Every item has two responses: the rank-1 response opens with token 0,
//! the rank-2 response with token 1, so a preference-trained policy has a
//! clean planted signal to find. Deterministic — no flags beyond the item
//! count:
//!
//! ```text
//! cargo run -p prefalign --example synthetic_data -- 48 > demo.jsonl
//! ```

use prefalign::data::{
    AnnotatedResponse, Category, Dataset, DimScores, RankedResponseSet, TokenSeq,
};

fn response(tokens: Vec<u32>, rank: u32, critique: Vec<u32>) -> AnnotatedResponse {
    let quality = 3.0 - rank as f64;
    AnnotatedResponse {
        model_name: format!("model-{rank}"),
        tokens: TokenSeq::new(tokens),
        rank,
        dim_scores: DimScores {
            helpfulness: quality,
            faithfulness: quality,
            ethics: quality,
        },
        critique: TokenSeq::new(critique),
    }
}

fn main() {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|arg| arg.parse().ok())
        .unwrap_or(24);
    let items: Vec<RankedResponseSet> = (0..n)
        .map(|i| {
            let x = i as f64;
            RankedResponseSet {
                id: format!("demo-{i:03}"),
                category: Category::ALL[i % Category::ALL.len()],
                features: vec![(x * 0.7).sin(), (x * 0.3).cos()],
                responses: vec![
                    response(vec![0, (i % 2) as u32], 1, vec![2]),
                    response(vec![1, ((i + 1) % 2) as u32], 2, vec![3]),
                ],
            }
        })
        .collect();
    let dataset = Dataset::from_items(items, 4).expect("demo items are valid");
    print!("{}", dataset.to_jsonl_string());
}
