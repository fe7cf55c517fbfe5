//! Diagonal Gaussian and categorical distributions over batches of rows.

use std::f64::consts::PI;

use rand::Rng;

use super::graph::Var;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `½ ln(2π)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Per-row diagonal Gaussian: `mean` and `std` are both `n × d`.
#[derive(Debug, Clone)]
pub struct DiagGaussian {
    pub mean: Var,
    pub std: Var,
}

impl DiagGaussian {
    pub fn new(mean: Var, std: Var) -> Result<Self> {
        if mean.shape() != std.shape() {
            return Err(Error::Shape(format!(
                "gaussian mean {:?} vs std {:?}",
                mean.shape(),
                std.shape()
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.cols()
    }

    pub fn rows(&self) -> usize {
        self.mean.rows()
    }

    /// Rows `index[i]` of both parameters.
    pub fn gather_rows(&self, index: &[usize]) -> Self {
        Self {
            mean: self.mean.gather_rows(index),
            std: self.std.gather_rows(index),
        }
    }

    pub fn detach(&self) -> Self {
        Self {
            mean: self.mean.detach(),
            std: self.std.detach(),
        }
    }
}

/// `Σ_i [−½ln(2π) − ln σ_i − (x_i−μ_i)²/(2σ_i²)]` per row (`n × 1`).
pub fn gaussian_logpdf(x: &Var, params: &DiagGaussian) -> Result<Var> {
    if x.shape() != params.mean.shape() {
        return Err(Error::Shape(format!(
            "gaussian_logpdf: x {:?} vs mean {:?}",
            x.shape(),
            params.mean.shape()
        )));
    }
    if let Some(s) = params.std.value().data().iter().find(|s| !(**s > 0.0)) {
        return Err(Error::Domain(format!("gaussian std must be positive, got {s}")));
    }
    let z = x.sub(&params.mean).div(&params.std);
    let per_dim = z
        .square()
        .scale(-0.5)
        .sub(&params.std.ln())
        .add_scalar(-HALF_LN_2PI);
    Ok(per_dim.sum_rows())
}

/// `μ + σ ⊙ ε` with `ε` held constant.
pub fn reparam_sample(params: &DiagGaussian, noise: &Tensor) -> Result<Var> {
    if noise.shape() != params.mean.shape() {
        return Err(Error::Shape(format!(
            "reparam_sample: noise {:?} vs mean {:?}",
            noise.shape(),
            params.mean.shape()
        )));
    }
    let eps = Var::leaf(noise.clone());
    Ok(params.mean.add(&params.std.mul(&eps)))
}

/// Closed-form entropy `Σ_i (½ ln(2πe) + ln σ_i)` per row.
pub fn gaussian_entropy(params: &DiagGaussian) -> Var {
    params
        .std
        .ln()
        .add_scalar(0.5 * (2.0 * PI * std::f64::consts::E).ln())
        .sum_rows()
}

/// Per-row categorical distribution over `n` actions given by logits.
#[derive(Debug, Clone)]
pub struct Categorical {
    pub logits: Var,
}

impl Categorical {
    pub fn new(logits: Var) -> Result<Self> {
        if !logits.value().all_finite() {
            return Err(Error::Domain("categorical logits must be finite".into()));
        }
        Ok(Self { logits })
    }

    pub fn n_actions(&self) -> usize {
        self.logits.cols()
    }

    /// Log-softmax with max subtraction.
    pub fn log_probs(&self) -> Var {
        let lse = self.logits.logsumexp_rows();
        self.logits.add_col(&lse.neg())
    }

    /// `ln p(a_i)` per row.
    pub fn log_prob(&self, actions: &[usize]) -> Result<Var> {
        let (n, k) = self.logits.shape();
        if actions.len() != n {
            return Err(Error::Shape(format!(
                "{} actions for {n} rows of logits",
                actions.len()
            )));
        }
        let mut mask = Tensor::zeros(n, k);
        for (i, &a) in actions.iter().enumerate() {
            if a >= k {
                return Err(Error::Contract(format!("action {a} out of range 0..{k}")));
            }
            mask.set(i, a, 1.0);
        }
        Ok(self.log_probs().mul(&Var::leaf(mask)).sum_rows())
    }

    /// `−Σ p ln p` per row.
    pub fn entropy(&self) -> Var {
        let lp = self.log_probs();
        lp.exp().mul(&lp).sum_rows().neg()
    }

    pub fn probs(&self) -> Tensor {
        let (n, k) = self.logits.shape();
        let mut out = Tensor::zeros(n, k);
        for i in 0..n {
            let row = self.logits.value().row_slice(i);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|&x| (x - m).exp()).sum();
            for (j, &x) in row.iter().enumerate() {
                out.set(i, j, (x - m).exp() / z);
            }
        }
        out
    }

    /// One inverse-CDF draw per row.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let p = self.probs();
        (0..p.rows())
            .map(|i| inverse_cdf(p.row_slice(i), rng.random::<f64>()))
            .collect()
    }

    /// Most probable action per row (lowest index on ties).
    pub fn mode(&self) -> Vec<usize> {
        (0..self.logits.rows())
            .map(|i| {
                let row = self.logits.value().row_slice(i);
                let mut best = 0;
                for (j, &x) in row.iter().enumerate() {
                    if x > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// First index whose cumulative probability exceeds `u ∈ [0, 1)`.
pub(crate) fn inverse_cdf(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // Rounding left the total just under u; fall back to the last index
    // with nonzero mass.
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(p.len() - 1)
}
