//! A training run assembled from a [`RunConfig`]: agent, environments,
//! trainer, metrics stream and checkpoints.

use std::io::Write;
use std::time::Instant;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::envs::{Env, VecEnv};
use crate::error::{Error, Result};
use crate::metrics::{MetricsRecord, MetricsWriter};
use crate::rl::{evaluate, Agent, EvalReport, Trainer};

/// Agent with freshly drawn parameters for `cfg`.
pub fn build_agent(cfg: &RunConfig) -> Result<Agent> {
    let env = cfg.make_env()?;
    Agent::new(cfg.agent, env.obs_dim(), env.action_space(), cfg.train.seed)
}

/// Agent for the configuration stored in `ckpt`, with its parameters.
pub fn agent_from_checkpoint(ckpt: &Checkpoint) -> Result<(RunConfig, Agent)> {
    let cfg = RunConfig::parse(&ckpt.config, &[])?;
    let mut agent = build_agent(&cfg)?;
    agent.store.load_from(&ckpt.param_store())?;
    Ok((cfg, agent))
}

pub struct Session {
    pub config: RunConfig,
    pub trainer: Trainer<Box<dyn Env>>,
}

impl Session {
    pub fn new(config: RunConfig) -> Result<Self> {
        let agent = build_agent(&config)?;
        let envs = VecEnv::new(config.make_envs(config.n_e)?, config.train.seed)?;
        let trainer = Trainer::new(agent, config.train, envs)?;
        Ok(Self { config, trainer })
    }

    /// Continues the run saved in `ckpt`, which must hold trainer state.
    pub fn resume(ckpt: &Checkpoint) -> Result<Self> {
        let state = ckpt
            .trainer
            .as_ref()
            .ok_or_else(|| Error::Contract("checkpoint has no trainer state to resume".into()))?;
        let (config, agent) = agent_from_checkpoint(ckpt)?;
        let envs = VecEnv::new(config.make_envs(config.n_e)?, config.train.seed)?;
        let mut trainer = Trainer::new(agent, config.train, envs)?;
        trainer.restore(state)?;
        Ok(Self { config, trainer })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_parts(
            self.config.to_toml(),
            &self.trainer.agent.store,
            Some(self.trainer.state()),
        )
    }

    /// Trains until `total_frames`, writing one metrics row per update.
    ///
    /// Every `checkpoint_every` updates a checkpoint becomes due; it is
    /// handed to `save` at the next gradient cut, the only point where a
    /// resumed run continues exactly as this one would. A final checkpoint
    /// is always handed over at the end.
    pub fn train<W: Write>(
        &mut self,
        metrics: &mut MetricsWriter<W>,
        mut save: impl FnMut(&Checkpoint) -> Result<()>,
    ) -> Result<()> {
        let start = Instant::now();
        let every = self.config.log.checkpoint_every;
        let mut due = false;
        while self.trainer.frames() < self.config.total_frames {
            let report = self.trainer.run_segment()?;
            let wall = self.config.log.wall_time.then(|| start.elapsed().as_secs_f64());
            metrics.write(&MetricsRecord::from_report(&report, self.config.train.seed, wall))?;
            if every > 0 && report.segment % every == 0 {
                due = true;
            }
            if due && self.trainer.steps_since_cut() == 0 {
                save(&self.checkpoint())?;
                due = false;
            }
        }
        save(&self.checkpoint())
    }

    /// Evaluates the current parameters on fresh environments.
    pub fn evaluate(&self, episodes: usize, seed: u64, stochastic: bool) -> Result<EvalReport> {
        evaluate(
            &self.trainer.agent,
            self.config.make_envs(self.config.n_e)?,
            episodes,
            seed,
            stochastic,
        )
    }
}
