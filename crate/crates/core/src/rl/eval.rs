use crate::encoders::RngNoise;
use crate::envs::{Action, Env, VecEnv};
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::diffmath::{Tensor, Var};

use super::agent::Agent;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Undiscounted return of each episode, in completion order.
    pub returns: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl EvalReport {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let n = returns.len().max(1) as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        Self {
            returns,
            mean,
            std: var.sqrt(),
        }
    }
}

/// Runs `episodes` episodes across `envs` in lockstep with fixed parameters.
///
/// Actions are sampled from the policy when `stochastic`, else the mean or
/// most probable action is taken. Episodes are counted in the order they
/// finish (by step, then environment index), so the result depends only on
/// `seed`.
pub fn evaluate<E: Env>(
    agent: &Agent,
    envs: Vec<E>,
    episodes: usize,
    seed: u64,
    stochastic: bool,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::Contract("need at least one evaluation episode".into()));
    }
    let mut envs = VecEnv::with_domain(envs, seed, Domain::Eval)?;
    if envs.obs_dim() != agent.obs_dim || envs.action_space() != agent.action_space {
        return Err(Error::Contract("checkpoint and environment spaces differ".into()));
    }
    let space = envs.action_space();
    let n_e = envs.len();
    let mut rng = stream(seed, Domain::Eval, u64::MAX);
    let bind = agent.store.bind();
    let init = agent.encoder.initial(&bind, n_e, &mut RngNoise::new(&mut rng))?.detach();
    let mut latent = init.clone();
    let mut obs = envs.reset_all();
    let mut prev = vec![Action::no_op(space); n_e];
    let mut returns = Vec::with_capacity(episodes);
    while returns.len() < episodes {
        let a_prev = Var::leaf(Tensor::from_rows(&prev.iter().map(|a| a.encode(space)).collect::<Vec<_>>())?);
        let o = Var::leaf(Tensor::from_rows(&obs)?);
        let step = agent
            .encoder
            .step(&bind, &latent, &a_prev, &o, &mut RngNoise::new(&mut rng))?;
        let s = step.latent.detach();
        let dist = agent.policy.forward(&bind, s.features())?;
        let actions = if stochastic { dist.sample(&mut rng) } else { dist.mode() };
        let out = envs.step(&actions)?;
        returns.extend(out.episode_returns.iter().flatten().copied());
        latent = s.select_reset(&init, &out.dones)?;
        prev = actions
            .into_iter()
            .zip(&out.dones)
            .map(|(a, &d)| if d { Action::no_op(space) } else { a })
            .collect();
        obs = out.obs;
    }
    returns.truncate(episodes);
    Ok(EvalReport::from_returns(returns))
}
