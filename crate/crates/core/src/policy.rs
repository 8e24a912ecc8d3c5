//! The trainable policy: a query-conditioned bigram sequence model.
//!
//! A sequence `y = (y_0, …, y_{T−1})` over a vocabulary of `V` ids is scored
//! autoregressively from per-step logits
//!
//! ```text
//! z_0 = s + U·cond            (start step)
//! z_t = T[y_{t−1}] + U·cond   (t ≥ 1, row of the transition matrix)
//! log p(y | cond) = Σ_t  z_t[y_t] − logsumexp(z_t)
//! ```
//!
//! where `cond` is the conditioning vector (query features for the policy;
//! query features concatenated with a response bag for the critique head).
//! This is the smallest model class with nontrivial sequence gradients, and
//! preference losses only ever need log-probabilities and their gradients.
//!
//! Gradients use the log-softmax derivative (indicator − softmax) and are
//! laid out in a fixed canonical order — `s`, then `T` row-major, then `U`
//! row-major — shared by [`Gradient`], [`PolicyParams::to_flat`], and the
//! optimizer.
//!
//! All arithmetic is `f64` with max-shifted log-sum-exp for stability.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TokenSeq;
use crate::num::{logsumexp, softmax};

/// Standard deviation of the seeded Gaussian initialization: small symmetric
/// noise that breaks ties without saturating any softmax.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("{what}: expected length {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("sequence must be nonempty")]
    EmptySequence,
    #[error("token id {id} outside vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("temperature must be > 0, got {temperature}")]
    InvalidTemperature { temperature: f64 },
    #[error("max_len must be ≥ 1")]
    InvalidMaxLen,
}

/// Parameters of the bigram model: start logits `s` (length `V`), transition
/// matrix `T` (`V×V`, row-major), and conditioning projection `U` (`V×c`,
/// row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    vocab_size: usize,
    cond_dim: usize,
    start: Vec<f64>,
    transition: Vec<f64>,
    query_proj: Vec<f64>,
}

impl PolicyParams {
    /// All-zero parameters (a uniform distribution at every step).
    pub fn zeros(vocab_size: usize, cond_dim: usize) -> Self {
        assert!(vocab_size >= 1, "vocabulary must have at least one id");
        PolicyParams {
            vocab_size,
            cond_dim,
            start: vec![0.0; vocab_size],
            transition: vec![0.0; vocab_size * vocab_size],
            query_proj: vec![0.0; vocab_size * cond_dim],
        }
    }

    /// Seeded Gaussian initialization: every entry drawn `N(0, std_dev²)`
    /// from a deterministic stream, filling `s`, then `T`, then `U` in
    /// canonical order.
    pub fn random_init(vocab_size: usize, cond_dim: usize, std_dev: f64, seed: u64) -> Self {
        let mut params = Self::zeros(vocab_size, cond_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std_dev).expect("finite std dev");
        for slot in params
            .start
            .iter_mut()
            .chain(params.transition.iter_mut())
            .chain(params.query_proj.iter_mut())
        {
            *slot = normal.sample(&mut rng);
        }
        params
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    /// The reserved end-of-sequence id: the last id of the vocabulary.
    pub fn eos_id(&self) -> u32 {
        (self.vocab_size - 1) as u32
    }

    /// Total number of scalar parameters: `V + V² + V·c`.
    pub fn param_count(&self) -> usize {
        self.start.len() + self.transition.len() + self.query_proj.len()
    }

    /// Flattens to the canonical ordering (`s`, `T` row-major, `U` row-major).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        flat.extend_from_slice(&self.start);
        flat.extend_from_slice(&self.transition);
        flat.extend_from_slice(&self.query_proj);
        flat
    }

    /// Rebuilds parameters from a canonical flat vector.
    pub fn from_flat(vocab_size: usize, cond_dim: usize, flat: &[f64]) -> Result<Self, PolicyError> {
        let expected = vocab_size + vocab_size * vocab_size + vocab_size * cond_dim;
        if flat.len() != expected {
            return Err(PolicyError::ShapeMismatch {
                what: "flat parameter vector",
                expected,
                got: flat.len(),
            });
        }
        let (start, rest) = flat.split_at(vocab_size);
        let (transition, query_proj) = rest.split_at(vocab_size * vocab_size);
        Ok(PolicyParams {
            vocab_size,
            cond_dim,
            start: start.to_vec(),
            transition: transition.to_vec(),
            query_proj: query_proj.to_vec(),
        })
    }

    /// One plain gradient-descent step: `θ ← θ − lr·g`.
    pub fn apply_step(&mut self, grad: &Gradient, learning_rate: f64) {
        assert_eq!(
            grad.len(),
            self.param_count(),
            "gradient length {} does not match parameter count {}",
            grad.len(),
            self.param_count()
        );
        let g = grad.as_slice();
        let v = self.start.len();
        let t = self.transition.len();
        for (slot, gi) in self.start.iter_mut().zip(&g[..v]) {
            *slot -= learning_rate * gi;
        }
        for (slot, gi) in self.transition.iter_mut().zip(&g[v..v + t]) {
            *slot -= learning_rate * gi;
        }
        for (slot, gi) in self.query_proj.iter_mut().zip(&g[v + t..]) {
            *slot -= learning_rate * gi;
        }
    }

    /// `U·cond`, the per-step conditioning offset.
    fn projection(&self, cond: &[f64]) -> Vec<f64> {
        let mut proj = vec![0.0; self.vocab_size];
        for (i, slot) in proj.iter_mut().enumerate() {
            let row = &self.query_proj[i * self.cond_dim..(i + 1) * self.cond_dim];
            *slot = row.iter().zip(cond).map(|(u, c)| u * c).sum();
        }
        proj
    }

    /// Logits for one step: `prev = None` is the start step.
    fn step_logits(&self, proj: &[f64], prev: Option<u32>) -> Vec<f64> {
        let base: &[f64] = match prev {
            None => &self.start,
            Some(p) => {
                let row = p as usize * self.vocab_size;
                &self.transition[row..row + self.vocab_size]
            }
        };
        base.iter().zip(proj).map(|(b, p)| b + p).collect()
    }

    fn check_inputs(&self, cond: &[f64], y: &TokenSeq) -> Result<(), PolicyError> {
        if cond.len() != self.cond_dim {
            return Err(PolicyError::ShapeMismatch {
                what: "conditioning vector",
                expected: self.cond_dim,
                got: cond.len(),
            });
        }
        if y.is_empty() {
            return Err(PolicyError::EmptySequence);
        }
        for &id in y.iter() {
            if id as usize >= self.vocab_size {
                return Err(PolicyError::TokenOutOfRange {
                    id,
                    vocab_size: self.vocab_size,
                });
            }
        }
        Ok(())
    }
}

/// A flat gradient (or any parameter-aligned vector) in the canonical
/// parameter ordering. The currency of every training op.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gradient(Vec<f64>);

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Gradient(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Gradient(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `self += factor · other`. Lengths must agree.
    pub fn add_scaled(&mut self, other: &Gradient, factor: f64) {
        assert_eq!(
            self.0.len(),
            other.0.len(),
            "gradient length mismatch: {} vs {}",
            self.0.len(),
            other.0.len()
        );
        for (slot, o) in self.0.iter_mut().zip(&other.0) {
            *slot += factor * o;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for slot in &mut self.0 {
            *slot *= factor;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }

    /// Concatenates two parameter blocks into one aligned vector.
    pub fn concat(head: &Gradient, tail: &Gradient) -> Gradient {
        let mut joined = Vec::with_capacity(head.len() + tail.len());
        joined.extend_from_slice(head.as_slice());
        joined.extend_from_slice(tail.as_slice());
        Gradient(joined)
    }
}

/// Exact log-probability `log p(y | cond)` under the bigram model.
pub fn logprob(params: &PolicyParams, cond: &[f64], y: &TokenSeq) -> Result<f64, PolicyError> {
    params.check_inputs(cond, y)?;
    let proj = params.projection(cond);
    let mut total = 0.0;
    let mut prev = None;
    for &tok in y.iter() {
        let z = params.step_logits(&proj, prev);
        total += z[tok as usize] - logsumexp(&z);
        prev = Some(tok);
    }
    Ok(total)
}

/// Log-probability together with its exact gradient w.r.t. all parameters.
///
/// Per step, `∂logp/∂z = indicator(y_t) − softmax(z)`; the start step feeds
/// the `s` block, later steps feed row `y_{t−1}` of `T`, and the summed
/// per-step terms feed `U` as an outer product with `cond` (the conditioning
/// offset is shared by every step).
pub fn logprob_grad(
    params: &PolicyParams,
    cond: &[f64],
    y: &TokenSeq,
) -> Result<(f64, Gradient), PolicyError> {
    params.check_inputs(cond, y)?;
    let v = params.vocab_size;
    let proj = params.projection(cond);
    let mut flat = vec![0.0; params.param_count()];
    let (grad_start, rest) = flat.split_at_mut(v);
    let (grad_transition, grad_proj) = rest.split_at_mut(v * v);
    // Accumulates Σ_t (indicator − softmax) for the U outer product.
    let mut dz_total = vec![0.0; v];
    let mut total = 0.0;
    let mut prev: Option<u32> = None;
    for &tok in y.iter() {
        let z = params.step_logits(&proj, prev);
        let p = softmax(&z);
        total += z[tok as usize] - logsumexp(&z);
        let target: &mut [f64] = match prev {
            None => grad_start,
            Some(pt) => {
                let row = pt as usize * v;
                &mut grad_transition[row..row + v]
            }
        };
        for i in 0..v {
            let d = if i == tok as usize { 1.0 - p[i] } else { -p[i] };
            target[i] += d;
            dz_total[i] += d;
        }
        prev = Some(tok);
    }
    for (i, d) in dz_total.iter().enumerate() {
        let row = &mut grad_proj[i * params.cond_dim..(i + 1) * params.cond_dim];
        for (slot, c) in row.iter_mut().zip(cond) {
            *slot = d * c;
        }
    }
    Ok((total, Gradient(flat)))
}

/// Autoregressive temperature sampling from a caller-owned generator.
/// Sampling stops after the end-of-sequence id `V−1` or at `max_len`.
pub fn sample_with_rng(
    params: &PolicyParams,
    cond: &[f64],
    max_len: usize,
    temperature: f64,
    rng: &mut impl Rng,
) -> Result<TokenSeq, PolicyError> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(PolicyError::InvalidTemperature { temperature });
    }
    if max_len == 0 {
        return Err(PolicyError::InvalidMaxLen);
    }
    if cond.len() != params.cond_dim {
        return Err(PolicyError::ShapeMismatch {
            what: "conditioning vector",
            expected: params.cond_dim,
            got: cond.len(),
        });
    }
    let proj = params.projection(cond);
    let eos = params.eos_id();
    let mut tokens = Vec::new();
    let mut prev = None;
    for _ in 0..max_len {
        let mut z = params.step_logits(&proj, prev);
        for logit in &mut z {
            *logit /= temperature;
        }
        let p = softmax(&z);
        let draw: f64 = rng.random();
        let mut cumulative = 0.0;
        let mut tok = (params.vocab_size - 1) as u32; // rounding fallback
        for (i, pi) in p.iter().enumerate() {
            cumulative += pi;
            if draw < cumulative {
                tok = i as u32;
                break;
            }
        }
        tokens.push(tok);
        if tok == eos {
            break;
        }
        prev = Some(tok);
    }
    Ok(TokenSeq::new(tokens))
}

/// Seeded autoregressive sampling: deterministic for a given
/// `(params, cond, max_len, temperature, seed)`.
pub fn sample(
    params: &PolicyParams,
    cond: &[f64],
    max_len: usize,
    temperature: f64,
    seed: u64,
) -> Result<TokenSeq, PolicyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(params, cond, max_len, temperature, &mut rng)
}

/// Greedy decoding: follows the argmax token at every step (lowest index on
/// ties) until the end-of-sequence id or `max_len`. The terminal id, when
/// reached, is included in the result.
pub fn greedy_decode(
    params: &PolicyParams,
    cond: &[f64],
    max_len: usize,
) -> Result<TokenSeq, PolicyError> {
    if max_len == 0 {
        return Err(PolicyError::InvalidMaxLen);
    }
    if cond.len() != params.cond_dim {
        return Err(PolicyError::ShapeMismatch {
            what: "conditioning vector",
            expected: params.cond_dim,
            got: cond.len(),
        });
    }
    let proj = params.projection(cond);
    let eos = params.eos_id();
    let mut tokens = Vec::new();
    let mut prev = None;
    for _ in 0..max_len {
        let z = params.step_logits(&proj, prev);
        let mut tok = 0u32;
        let mut best = z[0];
        for (i, &logit) in z.iter().enumerate().skip(1) {
            if logit > best {
                best = logit;
                tok = i as u32;
            }
        }
        tokens.push(tok);
        if tok == eos {
            break;
        }
        prev = Some(tok);
    }
    Ok(TokenSeq::new(tokens))
}

/// A reference policy frozen at a point in training. The wrapper hands out
/// only shared references, so the parameters inside can never be stepped;
/// training code keeps the trainable copy separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrozenPolicy(PolicyParams);

impl FrozenPolicy {
    pub fn params(&self) -> &PolicyParams {
        &self.0
    }
}

impl std::ops::Deref for FrozenPolicy {
    type Target = PolicyParams;

    fn deref(&self) -> &PolicyParams {
        &self.0
    }
}

/// Deep-copies `params` into an immutable reference policy.
pub fn freeze_reference(params: &PolicyParams) -> FrozenPolicy {
    FrozenPolicy(params.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::{
        all_sequences, fd_gradient, max_gradient_mismatch, FD_STEP, GRAD_REL_TOL,
    };

    fn random_params(v: usize, c: usize, seed: u64) -> PolicyParams {
        // Wider than INIT_STD so gradient entries are well off zero.
        PolicyParams::random_init(v, c, 0.5, seed)
    }

    fn random_cond(c: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
        (0..c).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn uniform_params_give_uniform_logprob() {
        let params = PolicyParams::zeros(5, 3);
        let cond = vec![0.4, -0.2, 1.0];
        for len in 1..=4 {
            let y = TokenSeq::new(vec![2; len]);
            let lp = logprob(&params, &cond, &y).unwrap();
            let expected = -(len as f64) * (5.0f64).ln();
            assert!((lp - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_computed_two_symbol_case() {
        // s = [ln 3, 0]: p(0) = 3/4 at the start step.
        let mut params = PolicyParams::zeros(2, 1);
        params.start[0] = 3.0f64.ln();
        let lp = logprob(&params, &[0.0], &TokenSeq::new(vec![0])).unwrap();
        assert!((lp - 0.75f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn probabilities_normalize_over_the_whole_sequence_space() {
        for seed in 0..5u64 {
            let v = 2 + (seed as usize % 3); // V ∈ {2,3,4}
            let params = random_params(v, 2, seed);
            let cond = random_cond(2, seed);
            for len in 1..=4 {
                let total: f64 = all_sequences(v, len)
                    .into_iter()
                    .map(|toks| {
                        logprob(&params, &cond, &TokenSeq::new(toks))
                            .unwrap()
                            .exp()
                    })
                    .sum();
                assert!(
                    (total - 1.0).abs() < 1e-10,
                    "V={v} len={len} seed={seed}: Σp = {total}"
                );
            }
        }
    }

    #[test]
    fn uniform_gradient_matches_log_softmax_derivative() {
        let params = PolicyParams::zeros(2, 1);
        let (_, grad) = logprob_grad(&params, &[0.0], &TokenSeq::new(vec![0])).unwrap();
        let g = grad.as_slice();
        assert!((g[0] - 0.5).abs() < 1e-15);
        assert!((g[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences_on_100_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..100 {
            let v = rng.random_range(2..=4usize);
            let c = rng.random_range(1..=3usize);
            let len = rng.random_range(1..=4usize);
            let params = random_params(v, c, case);
            let cond = random_cond(c, case);
            let y = TokenSeq::new((0..len).map(|_| rng.random_range(0..v as u32)).collect());
            let (value, analytic) = logprob_grad(&params, &cond, &y).unwrap();
            assert!((value - logprob(&params, &cond, &y).unwrap()).abs() < 1e-12);
            let numeric = fd_gradient(
                |flat| {
                    let p = PolicyParams::from_flat(v, c, flat).unwrap();
                    logprob(&p, &cond, &y).unwrap()
                },
                &params.to_flat(),
                FD_STEP,
            );
            let mismatch = max_gradient_mismatch(analytic.as_slice(), &numeric);
            assert!(
                mismatch <= GRAD_REL_TOL,
                "case {case}: rel err {mismatch:.3e}"
            );
        }
    }

    #[test]
    fn u_block_gradient_is_an_outer_product_with_cond() {
        let params = random_params(2, 2, 9);
        let cond = [0.7, -1.3];
        let y = TokenSeq::new(vec![1, 0]);
        let (_, grad) = logprob_grad(&params, &cond, &y).unwrap();
        let g = grad.as_slice();
        let u_block = &g[2 + 4..]; // after s (2) and T (4)
        // Each U row must be proportional to cond: row_i = d_i · cond.
        for i in 0..2 {
            let row = &u_block[i * 2..(i + 1) * 2];
            let d = row[0] / cond[0];
            assert!((row[1] - d * cond[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_and_range_violations_error() {
        let params = PolicyParams::zeros(3, 2);
        assert!(matches!(
            logprob(&params, &[0.0], &TokenSeq::new(vec![0])),
            Err(PolicyError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            logprob(&params, &[0.0, 0.0], &TokenSeq::empty()),
            Err(PolicyError::EmptySequence)
        ));
        assert!(matches!(
            logprob(&params, &[0.0, 0.0], &TokenSeq::new(vec![3])),
            Err(PolicyError::TokenOutOfRange { id: 3, .. })
        ));
        assert!(matches!(
            sample(&params, &[0.0, 0.0], 4, 0.0, 1),
            Err(PolicyError::InvalidTemperature { .. })
        ));
        assert!(matches!(
            sample(&params, &[0.0, 0.0], 0, 1.0, 1),
            Err(PolicyError::InvalidMaxLen)
        ));
    }

    #[test]
    fn forced_eos_sampling_emits_the_sentinel_alone() {
        let mut params = PolicyParams::zeros(4, 1);
        params.start[3] = 40.0; // overwhelming mass on EOS = V−1
        let seq = sample(&params, &[0.0], 10, 1.0, 123).unwrap();
        assert_eq!(seq.as_slice(), &[3]);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let params = random_params(5, 2, 4);
        let cond = random_cond(2, 4);
        let a = sample(&params, &cond, 12, 0.8, 99).unwrap();
        let b = sample(&params, &cond, 12, 0.8, 99).unwrap();
        assert_eq!(a, b);
        let c = sample(&params, &cond, 12, 0.8, 100).unwrap();
        // Different seeds will generically differ; only assert it stays valid.
        assert!(c.len() <= 12);
    }

    #[test]
    fn first_token_frequencies_match_uniform_within_three_sigma() {
        let params = PolicyParams::zeros(4, 1);
        let n = 10_000;
        let mut counts = [0usize; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..n {
            let seq = sample_with_rng(&params, &[0.0], 1, 1.0, &mut rng).unwrap();
            counts[seq.as_slice()[0] as usize] += 1;
        }
        let p = 0.25;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for (i, count) in counts.iter().enumerate() {
            let freq = *count as f64 / n as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "token {i}: freq {freq} vs p {p} (3σ = {:.4})",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn max_len_caps_generation_without_eos() {
        let mut params = PolicyParams::zeros(3, 1);
        params.start[0] = 40.0;
        params.transition[0] = 40.0; // token 0 → token 0 forever
        let seq = sample(&params, &[0.0], 7, 1.0, 5).unwrap();
        assert_eq!(seq.as_slice(), &[0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn greedy_decode_follows_the_argmax_chain() {
        let mut params = PolicyParams::zeros(4, 1);
        params.start[1] = 2.0;
        params.transition[4 + 2] = 3.0; // after 1, prefer 2
        params.transition[2 * 4 + 3] = 5.0; // after 2, prefer EOS
        let seq = greedy_decode(&params, &[0.0], 10).unwrap();
        assert_eq!(seq.as_slice(), &[1, 2, 3], "chain 1 → 2 → EOS");

        // All-equal logits: ties resolve to the lowest index, which is
        // token 0 forever, so max_len caps the output.
        let uniform = PolicyParams::zeros(3, 1);
        let capped = greedy_decode(&uniform, &[0.0], 4).unwrap();
        assert_eq!(capped.as_slice(), &[0, 0, 0, 0]);

        assert!(matches!(
            greedy_decode(&uniform, &[0.0], 0),
            Err(PolicyError::InvalidMaxLen)
        ));
        assert!(matches!(
            greedy_decode(&uniform, &[0.0, 1.0], 4),
            Err(PolicyError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn frozen_reference_is_immune_to_training_steps() {
        let params = random_params(3, 2, 11);
        let reference = freeze_reference(&params);
        let mut trainable = params.clone();
        let grad = Gradient::from_vec(vec![1.0; trainable.param_count()]);
        trainable.apply_step(&grad, 0.1);
        assert_ne!(trainable, params);
        assert_eq!(reference.params(), &params, "reference must stay bitwise intact");
        // Freezing is idempotent: freezing the frozen copy changes nothing.
        let again = freeze_reference(reference.params());
        assert_eq!(again, reference);
    }

    #[test]
    fn flat_roundtrip_and_step_are_consistent() {
        let params = random_params(4, 3, 21);
        let flat = params.to_flat();
        assert_eq!(flat.len(), params.param_count());
        let back = PolicyParams::from_flat(4, 3, &flat).unwrap();
        assert_eq!(back, params);
        assert!(matches!(
            PolicyParams::from_flat(4, 3, &flat[1..]),
            Err(PolicyError::ShapeMismatch { .. })
        ));

        // θ − lr·g moves every coordinate by exactly lr·g in flat space.
        let mut stepped = params.clone();
        let grad = Gradient::from_vec((0..flat.len()).map(|i| i as f64 * 0.1).collect());
        stepped.apply_step(&grad, 2.0);
        for (i, (before, after)) in flat.iter().zip(stepped.to_flat()).enumerate() {
            assert!((after - (before - 2.0 * (i as f64) * 0.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn init_is_seed_deterministic_and_seed_sensitive() {
        let a = PolicyParams::random_init(4, 2, INIT_STD, 7);
        let b = PolicyParams::random_init(4, 2, INIT_STD, 7);
        let c = PolicyParams::random_init(4, 2, INIT_STD, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        // Small init: nothing saturates.
        assert!(a.to_flat().iter().all(|x| x.abs() < 0.2));
    }
}
