//! Independent numerical oracles backing the test suites.
//!
//! Nothing in this module reuses the analytic code paths it is meant to
//! verify: gradients are estimated with symmetric finite differences, and
//! distribution normalization is checked by exhaustively enumerating the
//! sequence space. Tolerances are centralized here so that every suite in
//! the workspace gates on the same numbers.

/// Step size for symmetric finite differences.
pub const FD_STEP: f64 = 1e-5;

/// Maximum accepted relative error between an analytic gradient entry and
/// its finite-difference estimate.
pub const GRAD_REL_TOL: f64 = 1e-4;

/// Gradient entries where both the analytic and numeric value are at or
/// below this magnitude are skipped by relative comparison: the difference
/// of two near-zero estimates carries no signal.
pub const GRAD_MAG_FLOOR: f64 = 1e-8;

/// Symmetric finite-difference gradient of `f` at `at`:
/// `g_i ≈ (f(x + h·e_i) − f(x − h·e_i)) / 2h`.
///
/// `f` is treated as a black box; it is invoked `2·len` times on perturbed
/// copies of `at`.
pub fn fd_gradient<F>(mut f: F, at: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut point = at.to_vec();
    let mut grad = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        let saved = point[i];
        point[i] = saved + step;
        let plus = f(&point);
        point[i] = saved - step;
        let minus = f(&point);
        point[i] = saved;
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}

/// Relative error between two scalars: `|a − b| / max(|a|, |b|)`, and 0 when
/// both are exactly zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative error between an analytic gradient and its numeric
/// estimate, considering only entries where at least one side clears
/// [`GRAD_MAG_FLOOR`]. Panics if the slices have different lengths.
pub fn max_gradient_mismatch(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(
        analytic.len(),
        numeric.len(),
        "gradient length mismatch: analytic {} vs numeric {}",
        analytic.len(),
        numeric.len()
    );
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, n)| a.abs().max(n.abs()) > GRAD_MAG_FLOOR)
        .map(|(a, n)| relative_error(*a, *n))
        .fold(0.0, f64::max)
}

/// Every token sequence of exactly `len` symbols over a `vocab_size`-symbol
/// alphabet, in lexicographic order. `vocab_size^len` sequences; intended
/// for the small enumerations used by normalization oracles.
pub fn all_sequences(vocab_size: usize, len: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; len];
    loop {
        out.push(current.clone());
        // Odometer increment over base-`vocab_size` digits.
        let mut pos = len;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            current[pos] += 1;
            if (current[pos] as usize) < vocab_size {
                break;
            }
            current[pos] = 0;
        }
    }
}
