//! Fixed-temperature preference loss.
//!
//! The plain variant of the family: every pair is scored with the same
//! inverse temperature.
//!
//! ```text
//! loss = mean_i softplus(−β·u_i)
//! ```

use super::{pairwise_report, AlignmentObjective, LossError, LossReport};
use crate::pairs::ComparisonPair;
use crate::policy::{FrozenPolicy, PolicyParams};

/// Preference loss with one global `β` for every pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpoObjective {
    beta: f64,
}

impl DpoObjective {
    pub fn new(beta: f64) -> Self {
        DpoObjective { beta }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl AlignmentObjective for DpoObjective {
    fn name(&self) -> &'static str {
        "dpo"
    }

    fn evaluate(
        &self,
        policy: &PolicyParams,
        reference: &FrozenPolicy,
        pairs: &[ComparisonPair],
    ) -> Result<LossReport, LossError> {
        dpo_loss(policy, reference, pairs, self.beta)
    }
}

/// Batch preference loss with a fixed `β`.
pub fn dpo_loss(
    policy: &PolicyParams,
    reference: &FrozenPolicy,
    pairs: &[ComparisonPair],
    beta: f64,
) -> Result<LossReport, LossError> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(LossError::InvalidBeta { beta });
    }
    pairwise_report(policy, reference, pairs, |_, _| Ok(beta), None)
}
