//! Alignment objectives over preference pairs.
//!
//! Every objective here scores a policy against a frozen reference on a
//! batch of comparison pairs and returns the batch loss, its gradient in
//! canonical flat parameter order, and a per-pair breakdown. The family
//! shares one core:
//!
//! ```text
//! u    = [log π(y_w|x) − log π_ref(y_w|x)] − [log π(y_l|x) − log π_ref(y_l|x)]
//! loss = softplus(−β·u)          (= −log σ(β·u))
//! ```
//!
//! and the variants differ only in how `β` is chosen and whether a
//! perturbed-query term is added:
//!
//! * `dpo` — fixed `β` ([`dpo::DpoObjective`])
//! * `margin-dpo` — `β` rescaled per pair by its reward margin
//!   ([`margin::MarginDpoObjective`])
//! * `vision-dpo` — margin-scaled core plus a perturbed-query penalty
//!   ([`vision::VisionDpoObjective`])
//!
//! Variants implement [`AlignmentObjective`] and are registered by name, so
//! callers pick one at runtime with [`build_objective`]. Batch reduction is
//! the mean, accumulated in ascending pair order so results are
//! bit-reproducible.

pub mod dpo;
pub mod margin;
pub mod sft;
pub mod vision;

use thiserror::Error;

use crate::num::{sigmoid, softplus};
use crate::pairs::ComparisonPair;
use crate::policy::{logprob, logprob_grad, FrozenPolicy, Gradient, PolicyError, PolicyParams};
use crate::scaling::{ScalingConfig, ScalingError};

pub use dpo::{dpo_loss, DpoObjective};
pub use margin::{mm_dpo_loss, MarginDpoObjective};
pub use sft::sft_loss;
pub use vision::{vision_dpo_loss, VisionDpoObjective};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("cannot evaluate a loss over an empty pair batch")]
    EmptyBatch,
    #[error("beta must be positive and finite, got {beta}")]
    InvalidBeta { beta: f64 },
    #[error("{what} must be non-negative and finite, got {value}")]
    InvalidWeight { what: &'static str, value: f64 },
    #[error("pair {index} has no perturbed query but lambda > 0 requires one")]
    MissingVisionQuery { index: usize },
    #[error("unknown objective {name:?}; registered: {registered:?}")]
    UnknownObjective {
        name: String,
        registered: Vec<&'static str>,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
}

/// One pair's contribution: its loss term and the effective `β` applied to
/// it (for the perturbed-query objective this is the margin-scaled `β` of
/// the core term; the SFT term reports 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLoss {
    pub index: usize,
    pub loss: f64,
    pub beta: f64,
}

/// A loss evaluation: scalar value (the mean of `per_pair` losses), the
/// gradient with respect to the policy in canonical flat order, and the
/// per-pair breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub grad: Gradient,
    pub per_pair: Vec<PairLoss>,
}

/// A preference objective the trainer can drive: a name for selection and
/// logging, and a batch evaluation.
pub trait AlignmentObjective: Send + Sync {
    fn name(&self) -> &'static str;

    fn evaluate(
        &self,
        policy: &PolicyParams,
        reference: &FrozenPolicy,
        pairs: &[ComparisonPair],
    ) -> Result<LossReport, LossError>;
}

/// Everything needed to instantiate any registered objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub scaling: ScalingConfig,
    /// Weight of the perturbed-query term (`vision-dpo` only).
    pub lambda: f64,
    /// Fixed `β` of the perturbed-query term (`vision-dpo` only).
    pub beta_vision: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            scaling: ScalingConfig::default(),
            lambda: 0.0,
            beta_vision: ScalingConfig::default().beta_ori,
        }
    }
}

type Factory = fn(&ObjectiveConfig) -> Box<dyn AlignmentObjective>;

const REGISTRY: &[(&str, Factory)] = &[
    ("dpo", |cfg| Box::new(DpoObjective::new(cfg.scaling.beta_ori))),
    ("margin-dpo", |cfg| {
        Box::new(MarginDpoObjective::new(cfg.scaling))
    }),
    ("vision-dpo", |cfg| {
        Box::new(VisionDpoObjective::new(
            cfg.scaling,
            cfg.lambda,
            cfg.beta_vision,
        ))
    }),
];

/// Names of all registered objectives, in registry order.
pub fn registered_objectives() -> Vec<&'static str> {
    REGISTRY.iter().map(|(name, _)| *name).collect()
}

/// Instantiates the named objective from the registry.
pub fn build_objective(
    name: &str,
    cfg: &ObjectiveConfig,
) -> Result<Box<dyn AlignmentObjective>, LossError> {
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, factory)| factory(cfg))
        .ok_or_else(|| LossError::UnknownObjective {
            name: name.to_string(),
            registered: registered_objectives(),
        })
}

/// Per-pair log-ratio of policy to reference on one response:
/// `log π(y|x) − log π_ref(y|x)`.
pub fn logratio(
    policy: &PolicyParams,
    reference: &FrozenPolicy,
    features: &[f64],
    y: &crate::data::TokenSeq,
) -> Result<f64, PolicyError> {
    Ok(logprob(policy, features, y)? - logprob(reference.params(), features, y)?)
}

/// Shared evaluation core for the whole objective family.
///
/// `beta_of` supplies each pair's `β`; `vision` adds the perturbed-query
/// term with `(lambda, beta_vision)` when present. Gradient contributions
/// accumulate in ascending pair order (core term before perturbed term,
/// preferred side before rejected side) and the mean is taken once at the
/// end, so a given batch always reduces identically.
pub(crate) fn pairwise_report<B>(
    policy: &PolicyParams,
    reference: &FrozenPolicy,
    pairs: &[ComparisonPair],
    mut beta_of: B,
    vision: Option<(f64, f64)>,
) -> Result<LossReport, LossError>
where
    B: FnMut(usize, &ComparisonPair) -> Result<f64, LossError>,
{
    if pairs.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let mut grad = Gradient::zeros(policy.param_count());
    let mut per_pair = Vec::with_capacity(pairs.len());
    for (index, pair) in pairs.iter().enumerate() {
        let feats = &pair.query.features;
        let (lp_w, g_w) = logprob_grad(policy, feats, &pair.chosen)?;
        let (lp_l, g_l) = logprob_grad(policy, feats, &pair.rejected)?;
        let rp_w = logprob(reference.params(), feats, &pair.chosen)?;
        let rp_l = logprob(reference.params(), feats, &pair.rejected)?;
        let u = (lp_w - rp_w) - (lp_l - rp_l);
        let beta = beta_of(index, pair)?;
        let mut loss = softplus(-beta * u);
        // d loss / du = −β σ(−β u), applied through ∇log π(y_w) − ∇log π(y_l).
        let coeff = -beta * sigmoid(-beta * u);
        grad.add_scaled(&g_w, coeff);
        grad.add_scaled(&g_l, -coeff);
        if let Some((lambda, beta_v)) = vision {
            let vq = pair
                .vision_query
                .as_ref()
                .ok_or(LossError::MissingVisionQuery { index })?;
            let (lp_lv, g_lv) = logprob_grad(policy, &vq.features, &pair.rejected)?;
            let rp_lv = logprob(reference.params(), &vq.features, &pair.rejected)?;
            let v = (lp_w - rp_w) - (lp_lv - rp_lv);
            loss += lambda * softplus(-beta_v * v);
            let vcoeff = -lambda * beta_v * sigmoid(-beta_v * v);
            grad.add_scaled(&g_w, vcoeff);
            grad.add_scaled(&g_lv, -vcoeff);
        }
        per_pair.push(PairLoss { index, loss, beta });
    }
    let n = pairs.len() as f64;
    grad.scale(1.0 / n);
    let value = per_pair.iter().map(|p| p.loss).sum::<f64>() / n;
    Ok(LossReport {
        value,
        grad,
        per_pair,
    })
}

/// [`combined_loss`] with the two component values alongside the merged
/// report: `(combined, alignment value, supervised value)`. The supervised
/// value is 0 when `sft_weight` is 0 (the term is then never evaluated).
pub fn combined_loss_parts(
    policy: &PolicyParams,
    reference: &FrozenPolicy,
    objective: &dyn AlignmentObjective,
    pairs: &[ComparisonPair],
    sft_weight: f64,
) -> Result<(LossReport, f64, f64), LossError> {
    if !sft_weight.is_finite() || sft_weight < 0.0 {
        return Err(LossError::InvalidWeight {
            what: "sft_weight",
            value: sft_weight,
        });
    }
    let mut align = objective.evaluate(policy, reference, pairs)?;
    let align_value = align.value;
    if sft_weight == 0.0 {
        return Ok((align, align_value, 0.0));
    }
    let sft = sft_loss(policy, pairs)?;
    for (a, s) in align.per_pair.iter_mut().zip(&sft.per_pair) {
        a.loss += sft_weight * s.loss;
    }
    align.grad.add_scaled(&sft.grad, sft_weight);
    align.value = align.per_pair.iter().map(|p| p.loss).sum::<f64>() / pairs.len() as f64;
    Ok((align, align_value, sft.value))
}

/// Alignment objective plus weighted supervised term on the preferred
/// responses: per pair `a_i + w·s_i`, reduced by the mean. With `w = 0`
/// the alignment report is returned untouched.
pub fn combined_loss(
    policy: &PolicyParams,
    reference: &FrozenPolicy,
    objective: &dyn AlignmentObjective,
    pairs: &[ComparisonPair],
    sft_weight: f64,
) -> Result<LossReport, LossError> {
    combined_loss_parts(policy, reference, objective, pairs, sft_weight)
        .map(|(report, _, _)| report)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::freeze_reference;
    use testutil::{random_pairs, random_policy};

    #[test]
    fn registry_lists_the_three_variants_in_order() {
        assert_eq!(registered_objectives(), vec!["dpo", "margin-dpo", "vision-dpo"]);
        for name in registered_objectives() {
            let obj = build_objective(name, &ObjectiveConfig::default()).unwrap();
            assert_eq!(obj.name(), name);
        }
    }

    #[test]
    fn unknown_objective_reports_the_registered_names() {
        match build_objective("ppo", &ObjectiveConfig::default()) {
            Err(LossError::UnknownObjective { name, registered }) => {
                assert_eq!(name, "ppo");
                assert_eq!(registered, vec!["dpo", "margin-dpo", "vision-dpo"]);
            }
            Err(other) => panic!("expected unknown-objective error, got {other:?}"),
            Ok(_) => panic!("expected unknown-objective error, got an objective"),
        }
    }

    #[test]
    fn trait_dispatch_matches_the_free_functions_bitwise() {
        let policy = random_policy(5, 3, 2);
        let reference = freeze_reference(&random_policy(6, 3, 2));
        let pairs = random_pairs(7, 4, 3, 2, true);
        let cfg = ObjectiveConfig {
            lambda: 0.3,
            ..ObjectiveConfig::default()
        };

        let by_name = |name: &str| {
            build_objective(name, &cfg)
                .unwrap()
                .evaluate(&policy, &reference, &pairs)
                .unwrap()
        };
        assert_eq!(
            by_name("dpo"),
            dpo_loss(&policy, &reference, &pairs, cfg.scaling.beta_ori).unwrap()
        );
        assert_eq!(
            by_name("margin-dpo"),
            mm_dpo_loss(&policy, &reference, &pairs, &cfg.scaling).unwrap()
        );
        assert_eq!(
            by_name("vision-dpo"),
            vision_dpo_loss(&policy, &reference, &pairs, &cfg.scaling, 0.3, cfg.beta_vision)
                .unwrap()
        );
    }

    #[test]
    fn batch_value_is_the_mean_of_per_pair_losses() {
        let policy = random_policy(11, 3, 2);
        let reference = freeze_reference(&random_policy(12, 3, 2));
        let pairs = random_pairs(13, 6, 3, 2, false);
        let report = mm_dpo_loss(&policy, &reference, &pairs, &ScalingConfig::default()).unwrap();
        let mean = report.per_pair.iter().map(|p| p.loss).sum::<f64>() / 6.0;
        assert!((report.value - mean).abs() < 1e-12);

        // Each pair evaluated alone reproduces its batch entry.
        for (i, pair) in pairs.iter().enumerate() {
            let solo = mm_dpo_loss(
                &policy,
                &reference,
                std::slice::from_ref(pair),
                &ScalingConfig::default(),
            )
            .unwrap();
            assert!((solo.value - report.per_pair[i].loss).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_batch_is_rejected_by_every_variant() {
        let policy = random_policy(1, 3, 2);
        let reference = freeze_reference(&policy);
        for name in registered_objectives() {
            let obj = build_objective(name, &ObjectiveConfig::default()).unwrap();
            assert!(matches!(
                obj.evaluate(&policy, &reference, &[]),
                Err(LossError::EmptyBatch)
            ));
        }
        assert!(matches!(
            sft_loss(&policy, &[]),
            Err(LossError::EmptyBatch)
        ));
    }

    #[test]
    fn combined_loss_with_zero_weight_is_the_alignment_report() {
        let policy = random_policy(21, 3, 2);
        let reference = freeze_reference(&random_policy(22, 3, 2));
        let pairs = random_pairs(23, 3, 3, 2, false);
        let obj = build_objective("margin-dpo", &ObjectiveConfig::default()).unwrap();
        let plain = obj.evaluate(&policy, &reference, &pairs).unwrap();
        let combined = combined_loss(&policy, &reference, obj.as_ref(), &pairs, 0.0).unwrap();
        assert_eq!(plain, combined);
    }

    #[test]
    fn combined_loss_adds_the_weighted_supervised_term() {
        let policy = random_policy(31, 3, 2);
        let reference = freeze_reference(&random_policy(32, 3, 2));
        let pairs = random_pairs(33, 4, 3, 2, false);
        let obj = build_objective("margin-dpo", &ObjectiveConfig::default()).unwrap();
        let w = 0.25;
        let combined = combined_loss(&policy, &reference, obj.as_ref(), &pairs, w).unwrap();
        let align = obj.evaluate(&policy, &reference, &pairs).unwrap();
        let sft = sft_loss(&policy, &pairs).unwrap();
        assert!((combined.value - (align.value + w * sft.value)).abs() < 1e-12);
        for i in 0..pairs.len() {
            let want = align.per_pair[i].loss + w * sft.per_pair[i].loss;
            assert!((combined.per_pair[i].loss - want).abs() < 1e-12);
            // Combined keeps the alignment β for logging.
            assert_eq!(combined.per_pair[i].beta, align.per_pair[i].beta);
        }
        for (g, (ga, gs)) in combined
            .grad
            .as_slice()
            .iter()
            .zip(align.grad.as_slice().iter().zip(sft.grad.as_slice()))
        {
            assert!((g - (ga + w * gs)).abs() < 1e-12);
        }
    }

    #[test]
    fn combined_loss_rejects_bad_weights() {
        let policy = random_policy(41, 3, 2);
        let reference = freeze_reference(&policy);
        let pairs = random_pairs(42, 2, 3, 2, false);
        let obj = build_objective("dpo", &ObjectiveConfig::default()).unwrap();
        for bad in [-0.5, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                combined_loss(&policy, &reference, obj.as_ref(), &pairs, bad),
                Err(LossError::InvalidWeight {
                    what: "sft_weight",
                    ..
                })
            ));
        }
    }

    #[test]
    fn gradient_descent_step_decreases_every_objective() {
        let reference = freeze_reference(&random_policy(52, 3, 2));
        let cfg = ObjectiveConfig {
            lambda: 0.4,
            ..ObjectiveConfig::default()
        };
        for name in registered_objectives() {
            let policy = random_policy(51, 3, 2);
            let pairs = random_pairs(53, 4, 3, 2, true);
            let obj = build_objective(name, &cfg).unwrap();
            let before = obj.evaluate(&policy, &reference, &pairs).unwrap();
            assert!(before.grad.l2_norm() > 1e-10, "{name}: degenerate instance");
            // Backtracking line search along the negative gradient: some
            // step size must reduce a differentiable loss.
            let mut lr = 1.0;
            let mut decreased = false;
            for _ in 0..40 {
                let mut stepped = policy.clone();
                stepped.apply_step(&before.grad, lr);
                let after = obj.evaluate(&stepped, &reference, &pairs).unwrap();
                if after.value < before.value {
                    decreased = true;
                    break;
                }
                lr *= 0.5;
            }
            assert!(decreased, "{name}: no descent step found");
        }
    }
}
