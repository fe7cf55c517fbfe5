//! Global-norm gradient clipping and RMSProp.

use super::tensor::Tensor;

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Tensor::sum_sq).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale_in_place(s);
        }
    }
    norm
}

/// RMSProp with per-parameter squared-gradient accumulators:
///
/// ```text
/// s ← α·s + (1−α)·g²
/// p ← p − lr·g / (√s + ε)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
    pub accum: Vec<Tensor>,
}

impl RmsProp {
    pub const DEFAULT_EPS: f64 = 1e-5;

    pub fn new(lr: f64, alpha: f64, eps: f64, shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            lr,
            alpha,
            eps,
            accum: shapes.into_iter().map(|(r, c)| Tensor::zeros(r, c)).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.accum.len());
        for ((p, g), s) in params.iter_mut().zip(grads).zip(&mut self.accum) {
            for ((pv, &gv), sv) in p.data_mut().iter_mut().zip(g.data()).zip(s.data_mut()) {
                *sv = self.alpha * *sv + (1.0 - self.alpha) * gv * gv;
                *pv -= self.lr * gv / (sv.sqrt() + self.eps);
            }
        }
    }
}
