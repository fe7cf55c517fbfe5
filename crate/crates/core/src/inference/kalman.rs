//! Exact log marginal likelihood of a linear-Gaussian state-space model.

use nalgebra::{DMatrix, DVector};

use crate::envs::LinearGaussianSsm;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `Σ_t log p(o_t | o_<t, a_<t)` for `obs = o_1..o_T` and
/// `actions = a_0..a_{T−1}`.
///
/// Uses the predict/update recursion starting from the prior on `s_0`; the
/// first observation is of `s_1 = A s_0 + B a_0 + ε`.
pub fn kalman_log_marginal(
    model: &LinearGaussianSsm,
    obs: &[DVector<f64>],
    actions: &[DVector<f64>],
) -> Result<f64> {
    if obs.len() != actions.len() {
        return Err(Error::Shape(format!(
            "{} observations but {} actions",
            obs.len(),
            actions.len()
        )));
    }
    let n = model.state_dim();
    let m = model.obs_dim();
    let mut mean = model.m0.clone();
    let mut cov = model.p0.clone();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut total = 0.0;
    for (t, (o, a)) in obs.iter().zip(actions).enumerate() {
        let step = t + 1;
        if o.len() != m {
            return Err(Error::Shape(format!("observation {step} has {} entries, expected {m}", o.len())));
        }
        model.check_action(a)?;
        let mean_pred = &model.a * &mean + &model.b * a;
        let cov_pred = &model.a * &cov * model.a.transpose() + &model.q;
        let s = &model.c * &cov_pred * model.c.transpose() + &model.r;
        let s = (&s + s.transpose()) * 0.5;
        let chol = s.clone().cholesky().ok_or_else(|| Error::Numerical {
            step,
            message: "innovation covariance is not positive definite".into(),
        })?;
        let innov = o - &model.c * &mean_pred;
        let solved = chol.solve(&innov);
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        total += -0.5 * (innov.dot(&solved) + log_det + m as f64 * LN_2PI);

        // K = P⁻ Cᵀ S⁻¹, Joseph-form covariance update.
        let gain = chol.solve(&(&model.c * &cov_pred)).transpose();
        mean = &mean_pred + &gain * innov;
        let ikc = &eye - &gain * &model.c;
        cov = &ikc * &cov_pred * ikc.transpose() + &gain * &model.r * gain.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
    }
    Ok(total)
}
