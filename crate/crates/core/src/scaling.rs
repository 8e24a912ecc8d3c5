//! Margin-driven scaling of the preference-loss temperature.
//!
//! Each comparison pair carries a reward margin `δ` (preferred score minus
//! rejected score). The per-pair loss temperature is
//!
//! ```text
//! β(δ) = β_ori · (1 + w·(1 − e^{−k·δ}))     clamped to [β_ori, (1+w)·β_ori]
//! ```
//!
//! so confident pairs (large positive margin) push updates up to `(1+w)`
//! times harder, while dubious pairs — including mis-ordered ones with
//! negative margin — fall back to the floor `β_ori`. The map is applied per
//! pair with no batch-level normalization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScalingError {
    #[error("scaling config field {field} is invalid: {value}")]
    InvalidConfig { field: &'static str, value: f64 },
    #[error("margin must be finite, got {delta}")]
    NonFiniteDelta { delta: f64 },
}

/// Parameters of the margin-to-β schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    /// Floor temperature (and the value at δ = 0). Must be > 0.
    pub beta_ori: f64,
    /// Relative headroom of the dynamic part; the ceiling is `(1+w)·β_ori`.
    /// Must be ≥ 0; `w = 0` disables scaling entirely.
    pub w: f64,
    /// Margin sensitivity of the exponential ramp. Must be > 0.
    pub k: f64,
}

impl Default for ScalingConfig {
    /// Defaults: `beta_ori = 0.1`, `w = 0.5`, `k = 0.5`.
    fn default() -> Self {
        ScalingConfig {
            beta_ori: 0.1,
            w: 0.5,
            k: 0.5,
        }
    }
}

impl ScalingConfig {
    pub fn new(beta_ori: f64, w: f64, k: f64) -> Result<Self, ScalingError> {
        let cfg = ScalingConfig { beta_ori, w, k };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ScalingError> {
        if !(self.beta_ori > 0.0 && self.beta_ori.is_finite()) {
            return Err(ScalingError::InvalidConfig {
                field: "beta_ori",
                value: self.beta_ori,
            });
        }
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return Err(ScalingError::InvalidConfig {
                field: "w",
                value: self.w,
            });
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(ScalingError::InvalidConfig {
                field: "k",
                value: self.k,
            });
        }
        Ok(())
    }

    /// Upper clamp `(1+w)·β_ori`.
    pub fn beta_max(&self) -> f64 {
        (1.0 + self.w) * self.beta_ori
    }
}

/// The margin-to-β map. Monotone nondecreasing in `delta`, bounded in
/// `[beta_ori, (1+w)·beta_ori]`, and exactly `beta_ori` at `delta = 0`.
pub fn beta(cfg: &ScalingConfig, delta: f64) -> Result<f64, ScalingError> {
    cfg.validate()?;
    if !delta.is_finite() {
        return Err(ScalingError::NonFiniteDelta { delta });
    }
    if cfg.w == 0.0 {
        // Degenerate schedule; also avoids 0·∞ when the exponential overflows.
        return Ok(cfg.beta_ori);
    }
    let raw = cfg.beta_ori * (1.0 + cfg.w * (1.0 - (-cfg.k * delta).exp()));
    // For very negative margins the exponential overflows to +∞ and `raw`
    // becomes −∞; the clamp still lands on the floor.
    Ok(raw.clamp(cfg.beta_ori, cfg.beta_max()))
}
