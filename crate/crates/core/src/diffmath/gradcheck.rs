use super::graph::Var;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of the scalar `f` against central finite
/// differences with step `eps`, coordinate by coordinate, at `params`.
///
/// Returns the largest relative error `|g − g_fd| / max(|g|, |g_fd|, 1e-8)`.
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&[Var]) -> Result<Var>,
{
    let leaves: Vec<Var> = params.iter().cloned().map(Var::leaf).collect();
    let out = f(&leaves)?;
    if out.shape() != (1, 1) {
        return Err(Error::Contract(format!(
            "grad_check needs a scalar function, got {:?}",
            out.shape()
        )));
    }
    let grads = out.backward();

    let eval = |values: &[Tensor]| -> Result<f64> {
        let vars: Vec<Var> = values.iter().cloned().map(Var::leaf).collect();
        Ok(f(&vars)?.item())
    };

    let mut worst: f64 = 0.0;
    let mut probe: Vec<Tensor> = params.to_vec();
    for (pi, leaf) in leaves.iter().enumerate() {
        let analytic = grads
            .get(leaf)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(leaf.rows(), leaf.cols()));
        for j in 0..params[pi].len() {
            let x0 = params[pi].data()[j];
            probe[pi].data_mut()[j] = x0 + eps;
            let up = eval(&probe)?;
            probe[pi].data_mut()[j] = x0 - eps;
            let down = eval(&probe)?;
            probe[pi].data_mut()[j] = x0;

            let fd = (up - down) / (2.0 * eps);
            let g = analytic.data()[j];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
