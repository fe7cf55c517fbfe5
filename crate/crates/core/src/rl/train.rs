//! Synchronous n-step actor-critic over a batch of environments.

use std::collections::VecDeque;

use crate::diffmath::{clip_global_norm, RmsProp, Tensor, Var};
use crate::encoders::{Latent, RngNoise};
use crate::envs::{Action, Env, VecEnv};
use crate::error::{Error, Result};
use crate::rng::{stream, Domain, StreamRng};

use super::agent::Agent;
use super::losses::{a2c_losses, elbo_loss, joint_loss, LossWeights, RolloutSegment};
use super::targets::compute_targets;

/// Episodes in the rolling return average.
pub const RETURN_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub n_s: usize,
    /// Longest chain of encoder steps gradients may flow through.
    pub n_g: usize,
    pub gamma: f64,
    pub weights: LossWeights,
    pub lr: f64,
    pub rms_alpha: f64,
    pub rms_eps: f64,
    pub clip_norm: f64,
    /// Let the policy and value losses reach the encoder.
    pub joint_optim: bool,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            n_s: 5,
            n_g: 25,
            gamma: 0.99,
            weights: LossWeights {
                entropy: 0.01,
                value: 0.5,
                elbo: 1.0,
            },
            lr: 1e-4,
            rms_alpha: 0.99,
            rms_eps: RmsProp::DEFAULT_EPS,
            clip_norm: 0.5,
            joint_optim: true,
            seed: 0,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 {
            return Err(Error::config("train.n_s", "must be at least 1"));
        }
        if self.n_g < self.n_s {
            return Err(Error::config(
                "train.n_g",
                format!("train.n_g ({}) must be at least train.n_s ({})", self.n_g, self.n_s),
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("train.gamma", "must lie in [0, 1)"));
        }
        if !(self.lr > 0.0) || !(self.clip_norm > 0.0) || !(self.rms_eps > 0.0) {
            return Err(Error::config("train.lr", "learning rate, rms_eps and clip_norm must be positive"));
        }
        if !(0.0..1.0).contains(&self.rms_alpha) {
            return Err(Error::config("train.rms_alpha", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// What one update did.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub segment: u64,
    /// Environment frames consumed so far, including this segment.
    pub frames: u64,
    /// Mean of the last [`RETURN_WINDOW`] finished episodes.
    pub mean_return: Option<f64>,
    pub loss_policy: f64,
    pub loss_value: f64,
    pub loss_entropy: f64,
    pub loss_elbo: Option<f64>,
    pub ess_mean: Option<f64>,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    pub finished_returns: Vec<f64>,
    /// With probing on: whether this update's loss reached the latent that
    /// ended the previous segment.
    pub probe_reached: Option<bool>,
}

/// Plain values of a latent, for checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentValues {
    Rnn(Tensor),
    Dvrl {
        h: Tensor,
        z: Tensor,
        logw: Tensor,
        summary: Tensor,
    },
}

impl LatentValues {
    pub fn capture(latent: &Latent) -> Self {
        match latent {
            Latent::Rnn(h) => LatentValues::Rnn(h.value().clone()),
            Latent::Dvrl(b) => LatentValues::Dvrl {
                h: b.h.value().clone(),
                z: b.z.value().clone(),
                logw: b.logw.value().clone(),
                summary: b.summary.as_ref().expect("summary").value().clone(),
            },
        }
    }

    pub fn to_latent(&self) -> Latent {
        match self {
            LatentValues::Rnn(h) => Latent::Rnn(Var::leaf(h.clone())),
            LatentValues::Dvrl { h, z, logw, summary } => Latent::Dvrl(crate::encoders::ParticleBelief {
                h: Var::leaf(h.clone()),
                z: Var::leaf(z.clone()),
                logw: Var::leaf(logw.clone()),
                summary: Some(Var::leaf(summary.clone())),
                k: logw.cols(),
            }),
        }
    }
}

/// Everything besides parameters and configuration that a resumed run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    pub optimizer: Vec<Tensor>,
    pub agent_rng: crate::rng::RngState,
    pub bootstrap_rng: crate::rng::RngState,
    pub envs: crate::envs::VecEnvSnapshot,
    pub obs: Vec<Vec<f64>>,
    pub prev_actions: Vec<Action>,
    pub latent: Option<LatentValues>,
    pub steps_since_cut: usize,
    pub frames: u64,
    pub segment: u64,
    pub recent_returns: Vec<f64>,
}

pub struct Trainer<E> {
    pub agent: Agent,
    pub settings: TrainSettings,
    envs: VecEnv<E>,
    opt: RmsProp,
    agent_rng: StreamRng,
    boot_rng: StreamRng,
    /// `o_1` of the next segment.
    obs: Vec<Vec<f64>>,
    /// `a'_0`.
    prev_actions: Vec<Action>,
    /// `s'_0`; `None` before the first segment.
    latent: Option<Latent>,
    steps_since_cut: usize,
    frames: u64,
    segment: u64,
    recent: VecDeque<f64>,
    probe: bool,
    probe_target: Option<Latent>,
}

fn batch_rows(rows: &[Vec<f64>]) -> Result<Var> {
    Ok(Var::leaf(Tensor::from_rows(rows)?))
}

fn column_values(v: &Var) -> Vec<f64> {
    v.value().data().to_vec()
}

impl<E: Env> Trainer<E> {
    pub fn new(agent: Agent, settings: TrainSettings, mut envs: VecEnv<E>) -> Result<Self> {
        settings.validate()?;
        if envs.obs_dim() != agent.obs_dim || envs.action_space() != agent.action_space {
            return Err(Error::Contract("agent and environment spaces differ".into()));
        }
        let opt = RmsProp::new(
            settings.lr,
            settings.rms_alpha,
            settings.rms_eps,
            agent.store.entries().iter().map(|e| e.value.shape()),
        );
        let obs = envs.reset_all();
        let prev_actions = vec![Action::no_op(envs.action_space()); envs.len()];
        Ok(Self {
            opt,
            agent_rng: stream(settings.seed, Domain::Agent, 0),
            boot_rng: stream(settings.seed, Domain::Bootstrap, 0),
            obs,
            prev_actions,
            latent: None,
            steps_since_cut: 0,
            frames: 0,
            segment: 0,
            recent: VecDeque::with_capacity(RETURN_WINDOW),
            probe: false,
            probe_target: None,
            agent,
            settings,
            envs,
        })
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn segments(&self) -> u64 {
        self.segment
    }

    pub fn envs(&self) -> &VecEnv<E> {
        &self.envs
    }

    /// Steps in the gradient chain hanging off the carried latent.
    pub fn steps_since_cut(&self) -> usize {
        self.steps_since_cut
    }

    /// Record, for each update, whether its loss reached the previous
    /// segment's final latent.
    pub fn enable_probe(&mut self) {
        self.probe = true;
    }

    pub fn run_segment(&mut self) -> Result<SegmentReport> {
        let n_e = self.envs.len();
        let space = self.envs.action_space();
        let bind = self.agent.store.bind();
        let encoder = &self.agent.encoder;

        let mut noise = RngNoise::new(&mut self.agent_rng);
        let init = encoder.initial(&bind, n_e, &mut noise)?;
        let mut latent = self.latent.take().unwrap_or_else(|| init.clone());

        let mut seg = RolloutSegment {
            aux: encoder.has_aux().then(Vec::new),
            ..RolloutSegment::default()
        };
        let mut ess_sum = 0.0;
        let mut ess_count = 0usize;
        let mut finished = Vec::new();
        for _ in 0..self.settings.n_s {
            let a_prev = batch_rows(&self.prev_actions.iter().map(|a| a.encode(space)).collect::<Vec<_>>())?;
            let obs = batch_rows(&self.obs)?;
            let mut noise = RngNoise::new(&mut self.agent_rng);
            let step = encoder.step(&bind, &latent, &a_prev, &obs, &mut noise)?;
            if let (Some(aux), Some(term)) = (seg.aux.as_mut(), step.aux) {
                aux.push(term);
            }
            if let Some(e) = step.latent.mean_ess()? {
                ess_sum += e;
                ess_count += 1;
            }
            let s_j = step.latent;
            let mut features = s_j.features().clone();
            if !self.settings.joint_optim {
                features = features.detach();
            }
            let (dist, value) = self.agent.heads(&bind, &features)?;
            let actions = dist.sample(&mut self.agent_rng);
            seg.log_probs.push(dist.log_prob(&actions)?);
            seg.entropies.push(dist.entropy());
            seg.values.push(value);

            let out = self.envs.step(&actions)?;
            self.frames += n_e as u64;
            for r in out.episode_returns.iter().flatten() {
                finished.push(*r);
                if self.recent.len() == RETURN_WINDOW {
                    self.recent.pop_front();
                }
                self.recent.push_back(*r);
            }
            latent = s_j.select_reset(&init, &out.dones)?;
            self.prev_actions = actions
                .into_iter()
                .zip(&out.dones)
                .map(|(a, &d)| if d { Action::no_op(space) } else { a })
                .collect();
            self.obs = out.obs;
            seg.rewards.push(out.rewards);
            seg.dones.push(out.dones);
        }

        // s_{n+1} exists only to bootstrap the targets; it draws from its own
        // stream so the next segment's draws are unaffected.
        {
            let a_prev = batch_rows(&self.prev_actions.iter().map(|a| a.encode(space)).collect::<Vec<_>>())?;
            let obs = batch_rows(&self.obs)?;
            let mut noise = RngNoise::new(&mut self.boot_rng);
            let next = encoder.step(&bind, &latent.detach(), &a_prev, &obs, &mut noise)?;
            let v = self.agent.value.forward(&bind, &next.latent.features().detach())?;
            seg.bootstrap_values = column_values(&v);
        }

        let targets = compute_targets(&seg.rewards, &seg.dones, &seg.bootstrap_values, self.settings.gamma)?;
        let losses = a2c_losses(&seg, &targets)?;
        let elbo = if seg.aux.is_some() { Some(elbo_loss(&seg)?) } else { None };
        let total = joint_loss(&losses, elbo.as_ref(), self.settings.weights);

        self.segment += 1;
        let ess_mean = (ess_count > 0).then(|| ess_sum / ess_count as f64);
        if !total.value().all_finite() {
            return Err(Error::NonFiniteLoss {
                segment: self.segment,
                frames: self.frames,
                diagnostics: format!(
                    "policy={} value={} entropy={} elbo={:?} ess={:?}",
                    losses.policy.item(),
                    losses.value.item(),
                    losses.entropy.item(),
                    elbo.as_ref().map(Var::item),
                    ess_mean
                ),
            });
        }

        let probe_vars: Vec<Var> = match self.probe_target.take() {
            Some(Latent::Rnn(h)) => vec![h],
            Some(Latent::Dvrl(b)) => vec![b.h, b.logw],
            None => Vec::new(),
        };
        let probe_refs: Vec<&Var> = probe_vars.iter().collect();
        let grads = total.backward_retaining(&probe_refs);
        let probe_reached = self
            .probe
            .then(|| probe_vars.iter().any(|v| grads.get(v).is_some()));

        let n_params = self.agent.store.len();
        let mut g: Vec<Tensor> = grads
            .param_grads(n_params)
            .into_iter()
            .zip(self.agent.store.entries())
            .map(|(g, e)| g.unwrap_or_else(|| Tensor::zeros(e.value.rows(), e.value.cols())))
            .collect();
        drop(grads);
        let grad_norm = clip_global_norm(&mut g, self.settings.clip_norm);
        if !grad_norm.is_finite() {
            return Err(Error::NonFiniteLoss {
                segment: self.segment,
                frames: self.frames,
                diagnostics: format!("gradient norm {grad_norm}, ess={ess_mean:?}"),
            });
        }
        {
            let mut params: Vec<&mut Tensor> = self.agent.store.values_mut().collect();
            self.opt.step(&mut params, &g);
        }

        // Carry s'_n. Keep its graph only while the chain stays within n_g.
        self.steps_since_cut += self.settings.n_s;
        if self.probe {
            self.probe_target = Some(latent.clone());
        }
        if self.steps_since_cut + self.settings.n_s > self.settings.n_g {
            latent = latent.detach();
            self.steps_since_cut = 0;
        }
        self.latent = Some(latent);

        Ok(SegmentReport {
            segment: self.segment,
            frames: self.frames,
            mean_return: (!self.recent.is_empty())
                .then(|| self.recent.iter().sum::<f64>() / self.recent.len() as f64),
            loss_policy: losses.policy.item(),
            loss_value: losses.value.item(),
            loss_entropy: losses.entropy.item(),
            loss_elbo: elbo.as_ref().map(Var::item),
            ess_mean,
            grad_norm,
            finished_returns: finished,
            probe_reached,
        })
    }

    /// Snapshot for checkpoints. The carried latent is stored by value, so a
    /// resumed run matches an uninterrupted one exactly only when the
    /// snapshot is taken right after a gradient cut.
    pub fn state(&self) -> TrainerState {
        TrainerState {
            optimizer: self.opt.accum.clone(),
            agent_rng: crate::rng::RngState::capture(&self.agent_rng),
            bootstrap_rng: crate::rng::RngState::capture(&self.boot_rng),
            envs: self.envs.snapshot(),
            obs: self.obs.clone(),
            prev_actions: self.prev_actions.clone(),
            latent: self.latent.as_ref().map(LatentValues::capture),
            steps_since_cut: self.steps_since_cut,
            frames: self.frames,
            segment: self.segment,
            recent_returns: self.recent.iter().copied().collect(),
        }
    }

    /// Restores a snapshot. The restored latent has no graph, so the
    /// gradient chain restarts here.
    pub fn restore(&mut self, state: &TrainerState) -> Result<()> {
        if state.optimizer.len() != self.opt.accum.len()
            || state
                .optimizer
                .iter()
                .zip(&self.opt.accum)
                .any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::Contract("optimizer state does not match the parameters".into()));
        }
        let n = self.envs.len();
        if state.obs.len() != n || state.prev_actions.len() != n {
            return Err(Error::Contract(format!("state for {} environments, have {n}", state.obs.len())));
        }
        if let Some(l) = &state.latent {
            if l.to_latent().batch() != n {
                return Err(Error::Contract("latent batch does not match environments".into()));
            }
        }
        self.envs.restore(&state.envs)?;
        self.opt.accum = state.optimizer.clone();
        self.agent_rng = state.agent_rng.restore();
        self.boot_rng = state.bootstrap_rng.restore();
        self.obs = state.obs.clone();
        self.prev_actions = state.prev_actions.clone();
        self.latent = state.latent.as_ref().map(LatentValues::to_latent);
        self.steps_since_cut = 0;
        self.frames = state.frames;
        self.segment = state.segment;
        self.recent = state.recent_returns.iter().copied().collect();
        self.probe_target = None;
        Ok(())
    }
}
