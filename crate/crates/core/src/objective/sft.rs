//! Supervised term on the preferred responses.
//!
//! Length-normalized negative log-likelihood of each pair's preferred
//! response, averaged over the batch:
//!
//! ```text
//! loss = mean_i [ −log π(y_w_i | x_i) / |y_w_i| ]
//! ```
//!
//! Used as a stabilizing addition to the preference objectives (see
//! [`super::combined_loss`]), never on its own as a preference signal.

use super::{LossError, LossReport, PairLoss};
use crate::pairs::ComparisonPair;
use crate::policy::{logprob_grad, Gradient, PolicyParams};

/// Batch supervised loss over the preferred responses. Per-pair entries
/// report `β = 0` since no preference temperature is involved.
pub fn sft_loss(policy: &PolicyParams, pairs: &[ComparisonPair]) -> Result<LossReport, LossError> {
    if pairs.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let mut grad = Gradient::zeros(policy.param_count());
    let mut per_pair = Vec::with_capacity(pairs.len());
    for (index, pair) in pairs.iter().enumerate() {
        let (lp, g) = logprob_grad(policy, &pair.query.features, &pair.chosen)?;
        let len = pair.chosen.len() as f64;
        per_pair.push(PairLoss {
            index,
            loss: -lp / len,
            beta: 0.0,
        });
        grad.add_scaled(&g, -1.0 / len);
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
