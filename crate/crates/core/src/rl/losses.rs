use crate::diffmath::{Tensor, Var};
use crate::error::{Error, Result};

/// Everything recorded over `n_s` steps in `n_e` environments. Each `Var`
/// is `n_e × 1`; the outer vectors are indexed by step.
#[derive(Debug, Clone, Default)]
pub struct RolloutSegment {
    pub rewards: Vec<Vec<f64>>,
    pub dones: Vec<Vec<bool>>,
    pub log_probs: Vec<Var>,
    pub values: Vec<Var>,
    pub entropies: Vec<Var>,
    /// Per-step auxiliary terms from the encoder, if it produces any.
    pub aux: Option<Vec<Var>>,
    /// `V(s_{t+n_s})`, already detached.
    pub bootstrap_values: Vec<f64>,
}

impl RolloutSegment {
    pub fn n_steps(&self) -> usize {
        self.values.len()
    }

    pub fn n_envs(&self) -> usize {
        self.bootstrap_values.len()
    }
}

#[derive(Debug, Clone)]
pub struct A2cLosses {
    pub policy: Var,
    pub value: Var,
    pub entropy: Var,
}

fn check_steps(vars: &[Var], n_s: usize, n_e: usize, what: &str) -> Result<()> {
    if vars.len() != n_s || vars.iter().any(|v| v.shape() != (n_e, 1)) {
        return Err(Error::Contract(format!("{what} must be {n_s} steps of {n_e} × 1")));
    }
    Ok(())
}

/// `L^A = −mean(log π · A⁻)`, `L^V = mean(A²)`, `L^H = −mean(entropy)` with
/// `A = Q − V` and `A⁻` its detached copy.
pub fn a2c_losses(seg: &RolloutSegment, targets: &[Vec<f64>]) -> Result<A2cLosses> {
    let (n_s, n_e) = (seg.n_steps(), seg.n_envs());
    if n_s == 0 || n_e == 0 {
        return Err(Error::Contract("empty segment".into()));
    }
    check_steps(&seg.values, n_s, n_e, "values")?;
    check_steps(&seg.log_probs, n_s, n_e, "log-probabilities")?;
    check_steps(&seg.entropies, n_s, n_e, "entropies")?;
    if targets.len() != n_s || targets.iter().any(|t| t.len() != n_e) {
        return Err(Error::Contract(format!("targets must be {n_s} × {n_e}")));
    }
    let scale = 1.0 / (n_s * n_e) as f64;
    let mut pol = Vec::with_capacity(n_s);
    let mut val = Vec::with_capacity(n_s);
    for (j, q) in targets.iter().enumerate() {
        let adv = Var::leaf(Tensor::column(q)).sub(&seg.values[j]);
        let adv_const = adv.detach();
        pol.push(seg.log_probs[j].mul(&adv_const).sum());
        val.push(adv.square().sum());
    }
    let total = |parts: Vec<Var>| Var::concat_rows(&parts).sum().scale(scale);
    Ok(A2cLosses {
        policy: total(pol).neg(),
        value: total(val),
        entropy: total(seg.entropies.iter().map(Var::sum).collect()).neg(),
    })
}

/// `−mean` of the per-step auxiliary terms.
pub fn elbo_loss(seg: &RolloutSegment) -> Result<Var> {
    let aux = seg
        .aux
        .as_ref()
        .ok_or_else(|| Error::Contract("encoder produced no bound terms for this segment".into()))?;
    let (n_s, n_e) = (aux.len(), seg.n_envs());
    if n_s == 0 {
        return Err(Error::Contract("empty segment".into()));
    }
    check_steps(aux, n_s, n_e, "bound terms")?;
    let parts: Vec<Var> = aux.iter().map(Var::sum).collect();
    Ok(Var::concat_rows(&parts).sum().scale(-1.0 / (n_s * n_e) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub entropy: f64,
    pub value: f64,
    pub elbo: f64,
}

/// `L^A + λ^H L^H + λ^V L^V + λ^E L^ELBO`.
pub fn joint_loss(l: &A2cLosses, elbo: Option<&Var>, w: LossWeights) -> Var {
    let mut total = l
        .policy
        .add(&l.entropy.scale(w.entropy))
        .add(&l.value.scale(w.value));
    if let Some(e) = elbo {
        total = total.add(&e.scale(w.elbo));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Var {
        Var::leaf(Tensor::column(v))
    }

    fn seg(log_probs: &[f64], values: &[f64], ent: &[f64]) -> RolloutSegment {
        RolloutSegment {
            rewards: vec![vec![0.0]; log_probs.len()],
            dones: vec![vec![false]; log_probs.len()],
            log_probs: log_probs.iter().map(|&x| col(&[x])).collect(),
            values: values.iter().map(|&x| col(&[x])).collect(),
            entropies: ent.iter().map(|&x| col(&[x])).collect(),
            aux: None,
            bootstrap_values: vec![0.0],
        }
    }

    #[test]
    fn single_entry_values() {
        let s = seg(&[-0.5], &[1.0], &[0.0]);
        let l = a2c_losses(&s, &[vec![3.0]]).unwrap();
        assert_eq!(l.policy.item(), 1.0);
        assert_eq!(l.value.item(), 4.0);
    }

    #[test]
    fn zero_advantage() {
        let s = seg(&[-0.3, -2.0], &[1.5, -0.5], &[0.1, 0.2]);
        let l = a2c_losses(&s, &[vec![1.5], vec![-0.5]]).unwrap();
        assert_eq!(l.policy.item(), 0.0);
        assert_eq!(l.value.item(), 0.0);
    }

    #[test]
    fn uniform_policy_entropy() {
        let s = seg(&[0.0], &[0.0], &[4f64.ln()]);
        let l = a2c_losses(&s, &[vec![0.0]]).unwrap();
        assert!((l.entropy.item() + 1.386294).abs() < 1e-6);
    }

    #[test]
    fn advantage_is_detached_in_policy_loss() {
        let s = seg(&[-0.5], &[1.0], &[0.0]);
        let l = a2c_losses(&s, &[vec![3.0]]).unwrap();
        let g = l.policy.backward();
        assert!(g.get(&s.values[0]).is_none());
        assert_eq!(g.get(&s.log_probs[0]).unwrap().item(), -2.0);
    }

    #[test]
    fn elbo_loss_values() {
        let mut s = seg(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert!(matches!(elbo_loss(&s), Err(Error::Contract(_))));
        s.aux = Some(vec![col(&[-1.0]), col(&[-3.0])]);
        assert_eq!(elbo_loss(&s).unwrap().item(), 2.0);
        s.aux = Some(vec![col(&[0.7]), col(&[0.7])]);
        assert!((elbo_loss(&s).unwrap().item() + 0.7).abs() < 1e-15);
    }

    #[test]
    fn joint_loss_weighting() {
        let l = A2cLosses {
            policy: Var::scalar(1.5),
            value: Var::scalar(2.0),
            entropy: Var::scalar(-0.7),
        };
        let e = Var::scalar(3.0);
        let none = LossWeights { entropy: 0.0, value: 0.0, elbo: 0.0 };
        assert_eq!(joint_loss(&l, Some(&e), none).item(), 1.5);
        let only_e = A2cLosses { policy: Var::scalar(0.0), ..l.clone() };
        assert_eq!(joint_loss(&only_e, Some(&e), LossWeights { elbo: 1.0, ..none }).item(), 3.0);
        let at = |lh: f64| joint_loss(&l, Some(&e), LossWeights { entropy: lh, value: 0.5, elbo: 1.0 }).item();
        assert!((at(2.0) - at(1.0) - (at(1.0) - at(0.0))).abs() < 1e-12);
    }
}
