//! Margin-scaled preference loss with a perturbed-query penalty.
//!
//! Extends the margin-scaled core with a second term that contrasts the
//! preferred response under the true query against the rejected response
//! under a perturbed (feature-mixed) query `x_v`:
//!
//! ```text
//! v     = [log π(y_w|x) − log π_ref(y_w|x)] − [log π(y_l|x_v) − log π_ref(y_l|x_v)]
//! loss  = mean_i [ softplus(−β(δ_i)·u_i) + λ·softplus(−β_v·v_i) ]
//! ```
//!
//! The penalty keeps the preference grounded in the query itself: the
//! rejected response must stay dispreferred even when the conditioning is
//! corrupted. `β_v` is a fixed temperature; `λ` weights the term, and
//! `λ = 0` collapses to the margin-scaled loss exactly (the perturbed
//! queries are then not touched at all).

use super::{pairwise_report, AlignmentObjective, LossError, LossReport};
use crate::pairs::ComparisonPair;
use crate::policy::{FrozenPolicy, PolicyParams};
use crate::scaling::{beta, ScalingConfig};

/// Margin-scaled preference loss plus the weighted perturbed-query term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisionDpoObjective {
    scaling: ScalingConfig,
    lambda: f64,
    beta_vision: f64,
}

impl VisionDpoObjective {
    pub fn new(scaling: ScalingConfig, lambda: f64, beta_vision: f64) -> Self {
        VisionDpoObjective {
            scaling,
            lambda,
            beta_vision,
        }
    }
}

impl AlignmentObjective for VisionDpoObjective {
    fn name(&self) -> &'static str {
        "vision-dpo"
    }

    fn evaluate(
        &self,
        policy: &PolicyParams,
        reference: &FrozenPolicy,
        pairs: &[ComparisonPair],
    ) -> Result<LossReport, LossError> {
        vision_dpo_loss(
            policy,
            reference,
            pairs,
            &self.scaling,
            self.lambda,
            self.beta_vision,
        )
    }
}

/// Batch margin-scaled loss with the perturbed-query penalty. Every pair
/// must carry a perturbed query when `lambda > 0`.
pub fn vision_dpo_loss(
    policy: &PolicyParams,
    reference: &FrozenPolicy,
    pairs: &[ComparisonPair],
    scaling: &ScalingConfig,
    lambda: f64,
    beta_vision: f64,
) -> Result<LossReport, LossError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(LossError::InvalidWeight {
            what: "lambda",
            value: lambda,
        });
    }
    if !beta_vision.is_finite() || beta_vision <= 0.0 {
        return Err(LossError::InvalidBeta { beta: beta_vision });
    }
    let vision = (lambda > 0.0).then_some((lambda, beta_vision));
    pairwise_report(
        policy,
        reference,
        pairs,
        |_, pair| Ok(beta(scaling, pair.margin)?),
        vision,
    )
}
