use crate::error::{Error, Result};

/// n-step value targets, indexed `[step][env]`.
///
/// Runs backwards from the detached bootstrap value: `Q_j = r_{j+1} + γ Q_{j+1}`,
/// with the tail dropped whenever `done_{j+1}` is set.
pub fn compute_targets(
    rewards: &[Vec<f64>],
    dones: &[Vec<bool>],
    bootstrap: &[f64],
    gamma: f64,
) -> Result<Vec<Vec<f64>>> {
    let n_e = bootstrap.len();
    if rewards.len() != dones.len()
        || rewards.iter().any(|r| r.len() != n_e)
        || dones.iter().any(|d| d.len() != n_e)
    {
        return Err(Error::Contract(format!(
            "targets need rewards and dones of shape n_s × {n_e}"
        )));
    }
    let mut out = vec![vec![0.0; n_e]; rewards.len()];
    let mut next = bootstrap.to_vec();
    for j in (0..rewards.len()).rev() {
        for e in 0..n_e {
            let tail = if dones[j][e] { 0.0 } else { gamma * next[e] };
            out[j][e] = tail + rewards[j][e];
        }
        next.clone_from(&out[j]);
    }
    Ok(out)
}
