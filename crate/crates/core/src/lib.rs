//! Desk-scale preference alignment on ranked, critiqued response data.
//!
//! The crate trains a small autoregressive policy against pairwise
//! preferences using a family of direct-preference objectives (fixed-β,
//! margin-scaled β(δ), and a variant that adds perturbed-query negatives),
//! and trains a critique-conditioned linear reward model that first writes
//! a critique of a response and then scores it. Everything is exact-arithmetic
//! `f64`, seeded, and deterministic: the same inputs, config, and seed
//! produce bitwise-identical parameters and byte-identical artifacts.
//!
//! Module map:
//!
//! * [`data`] — core types (token sequences, query features, ranked and
//!   critiqued responses) plus JSONL ingestion and a byte-level tokenizer.
//! * [`policy`] — the query-conditioned bigram policy: exact log-likelihoods,
//!   analytic gradients, temperature sampling, and frozen reference copies.
//! * [`scaling`] — the bounded margin-to-β schedule applied per pair.
//! * [`pairs`] — preference-pair extraction from rank annotations, reward
//!   margins, query mixing for perturbed negatives, and self-sampled pairs.
//! * [`objective`] — the alignment-loss family behind one trait, selectable
//!   by name, plus supervised fine-tuning and combined losses.
//! * [`reward`] — the critique-then-score reward model: token-level critique
//!   likelihood, pairwise scoring loss, joint training loss, and greedy
//!   critique inference.
//! * [`cluster`] — k-means over query features, per-cluster subsampling, and
//!   ratio-targeted stratified resampling.
//! * [`eval`] — pairwise accuracy (overall and per category, with an
//!   all-pairs-correct variant) and implicit-reward accuracy for policies.
//! * [`trainer`] — seeded SGD loops for policy and reward model, bitwise
//!   checkpointing, and grid search over loss-weight and learning-rate.
//! * [`check`] — finite-difference and enumeration oracles used by the test
//!   suites to validate every analytic gradient and normalization claim.

pub mod check;
pub mod cluster;
pub mod data;
mod num;
pub mod eval;
pub mod objective;
pub mod pairs;
pub mod policy;
pub mod reward;
pub mod scaling;
pub mod trainer;
