//! Margin-scaled preference loss.
//!
//! Same pairwise core as the fixed variant, but each pair's inverse
//! temperature grows with its reward margin `δ`:
//!
//! ```text
//! β(δ) = β_ori · (1 + w · (1 − e^{−k·δ}))     clamped to [β_ori, (1+w)·β_ori]
//! loss = mean_i softplus(−β(δ_i)·u_i)
//! ```
//!
//! so confidently separated pairs (large `δ`) push harder than marginal
//! ones. `β` is a per-pair constant with respect to the policy, so the
//! gradient is the pairwise core's with `β(δ_i)` in place of `β`.

use super::{pairwise_report, AlignmentObjective, LossError, LossReport};
use crate::pairs::ComparisonPair;
use crate::policy::{FrozenPolicy, PolicyParams};
use crate::scaling::{beta, ScalingConfig};

/// Preference loss whose `β` is rescaled per pair by the reward margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginDpoObjective {
    scaling: ScalingConfig,
}

impl MarginDpoObjective {
    pub fn new(scaling: ScalingConfig) -> Self {
        MarginDpoObjective { scaling }
    }

    pub fn scaling(&self) -> &ScalingConfig {
        &self.scaling
    }
}

impl AlignmentObjective for MarginDpoObjective {
    fn name(&self) -> &'static str {
        "margin-dpo"
    }

    fn evaluate(
        &self,
        policy: &PolicyParams,
        reference: &FrozenPolicy,
        pairs: &[ComparisonPair],
    ) -> Result<LossReport, LossError> {
        mm_dpo_loss(policy, reference, pairs, &self.scaling)
    }
}

/// Batch preference loss with per-pair margin-scaled `β`.
pub fn mm_dpo_loss(
    policy: &PolicyParams,
    reference: &FrozenPolicy,
    pairs: &[ComparisonPair],
    scaling: &ScalingConfig,
) -> Result<LossReport, LossError> {
    pairwise_report(
        policy,
        reference,
        pairs,
        |_, pair| Ok(beta(scaling, pair.margin)?),
        None,
    )
}
