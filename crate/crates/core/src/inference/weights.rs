//! Log-weight bookkeeping: normalisation, multinomial resampling, effective
//! sample size, and the per-step and importance-weighted bounds.
//!
//! Weights are always handled in log space and normalised with a max-shifted
//! log-sum-exp. Ancestor indices are 0-based.

use rand::{Rng, RngCore};

use crate::diffmath::{log_sum_exp, Var};
use crate::error::{Error, Result};

fn checked_max(logw: &[f64]) -> Result<f64> {
    if logw.is_empty() || logw.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(Error::DegenerateWeights);
    }
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    Ok(m)
}

/// `w̄_k = exp(logw_k − logsumexp(logw))`.
pub fn normalized_weights(logw: &[f64]) -> Result<Vec<f64>> {
    checked_max(logw)?;
    let lse = log_sum_exp(logw);
    Ok(logw.iter().map(|&w| (w - lse).exp()).collect())
}

/// Draws `K = logw.len()` ancestors i.i.d. with probability `w̄_k`.
///
/// A single particle is its own ancestor and no randomness is consumed.
pub fn resample_ancestors(logw: &[f64], rng: &mut dyn RngCore) -> Result<Vec<usize>> {
    let w = normalized_weights(logw)?;
    let k = w.len();
    if k == 1 {
        return Ok(vec![0]);
    }
    let mut cdf = Vec::with_capacity(k);
    let mut acc = 0.0;
    for &wi in &w {
        acc += wi;
        cdf.push(acc);
    }
    let last_live = w.iter().rposition(|&x| x > 0.0).unwrap_or(k - 1);
    Ok((0..k)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(last_live)
        })
        .collect())
}

/// `1 / Σ_k w̄_k²`, in `[1, K]`.
pub fn ess(logw: &[f64]) -> Result<f64> {
    let w = normalized_weights(logw)?;
    Ok(1.0 / w.iter().map(|x| x * x).sum::<f64>())
}

/// `log((1/K) Σ_k w_k) = logsumexp(logw) − ln K`.
pub fn elbo_term_value(logw: &[f64]) -> Result<f64> {
    checked_max(logw)?;
    Ok(log_sum_exp(logw) - (logw.len() as f64).ln())
}

/// Differentiable per-row version of [`elbo_term_value`]: `B × K → B × 1`.
pub fn elbo_term(logw: &Var) -> Result<Var> {
    let (b, k) = logw.shape();
    for i in 0..b {
        checked_max(logw.value().row_slice(i))?;
    }
    Ok(logw.logsumexp_rows().add_scalar(-(k as f64).ln()))
}

/// `log((1/K) Σ_k Π_t w_t^k)` from per-step log-weights computed without
/// resampling (particle `k` is its own ancestor at every step).
pub fn iwae_elbo(per_step_logw: &[Vec<f64>]) -> Result<f64> {
    let k = per_step_logw
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Contract("iwae_elbo needs at least one step".into()))?;
    if k == 0 || per_step_logw.iter().any(|s| s.len() != k) {
        return Err(Error::Contract(
            "iwae_elbo needs the same non-zero particle count at every step".into(),
        ));
    }
    let totals: Vec<f64> = (0..k)
        .map(|j| per_step_logw.iter().map(|s| s[j]).sum())
        .collect();
    elbo_term_value(&totals)
}
