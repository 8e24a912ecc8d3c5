//! Shared numerically-stable scalar kernels.

/// Max-shifted log-sum-exp: `m + ln Σ exp(v_i − m)` with `m = max v_i`.
/// Input must be nonempty with finite entries.
pub(crate) fn logsumexp(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + sum.ln()
}

/// Stable softmax into a fresh vector.
pub(crate) fn softmax(values: &[f64]) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = values.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// `ln(1 + e^x)` without overflow for large |x|. `softplus(0) = ln 2` exactly.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid computed without overflow. `sigmoid(0) = 0.5` exactly.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
