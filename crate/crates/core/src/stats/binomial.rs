use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use super::StatError;

/// Count of significant findings among `n_trials` tests at threshold
/// `threshold`, with the upper binomial tail as p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliTestResult {
    pub n_trials: u64,
    pub n_significant: u64,
    pub threshold: f64,
    pub p_value: f64,
}

impl BernoulliTestResult {
    pub fn new(n_trials: u64, n_significant: u64, threshold: f64) -> Result<Self, StatError> {
        Ok(Self {
            n_trials,
            n_significant,
            threshold,
            p_value: binomial_tail(n_trials, n_significant, threshold)?,
        })
    }
}

/// `P(X ≥ k)` for `X ~ Binomial(n, tau)`.
///
/// Terms are evaluated in log space and summed smallest first after scaling
/// by the largest term, so deep tails neither underflow nor lose digits to
/// cancellation.
pub fn binomial_tail(n: u64, k: u64, tau: f64) -> Result<f64, StatError> {
    if k > n {
        return Err(StatError::Domain(format!("k = {k} exceeds N = {n}")));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(StatError::Domain(format!("tau = {tau} outside (0, 1)")));
    }
    if k == 0 {
        return Ok(1.0);
    }

    let ln_tau = tau.ln();
    let ln_not = (-tau).ln_1p();
    let mut terms: Vec<f64> = (k..=n)
        .map(|l| ln_binomial(n, l) + l as f64 * ln_tau + (n - l) as f64 * ln_not)
        .collect();
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    terms.sort_by(f64::total_cmp);
    let scaled: f64 = terms.iter().map(|t| (t - peak).exp()).sum();
    Ok((peak.exp() * scaled).clamp(0.0, 1.0))
}
