//! Run configuration: a TOML document with `[env]`, `[encoder]`, `[train]`
//! and `[log]` tables. Every key is optional and unknown keys are rejected.
//!
//! ```toml
//! [env]
//! kind = "mountain_hike"   # only kind
//! sigma_o = 3.0            # observation noise variance
//! flicker = 0.0            # probability of a blanked observation
//! horizon = 75
//! transition_var = 0.25
//! step_cap = 0.5
//! action_penalty = 0.01
//! ridge_slope = 0.1
//! ridge_basin = 0.0
//!
//! [encoder]
//! kind = "dvrl"            # or "rnn"
//! particles = 30
//! h_dim = 128
//! z_dim = 128
//! rnn_h_dim = 256
//! recon_loss = false       # rnn only
//! joint_optim = true
//!
//! [train]
//! n_e = 16
//! n_s = 5
//! n_g = 25
//! gamma = 0.99
//! lambda_h = 0.01
//! lambda_v = 0.5
//! lambda_e = 1.0
//! lr = 1e-4
//! rms_alpha = 0.99
//! rms_eps = 1e-5
//! clip_norm = 0.5
//! total_frames = 1000000
//! seed = 0
//!
//! [log]
//! metrics = "metrics.csv"
//! checkpoint = "checkpoint.bin"
//! checkpoint_every = 100   # segments; 0 writes only the final checkpoint
//! wall_time = false        # fill the wall_time column
//! ```

use std::path::Path;

use toml::{Table, Value};

use crate::envs::{Env, Flicker, MountainHike, MountainHikeParams, Ridge};
use crate::error::{Error, Result};
use crate::rl::{AgentSpec, EncoderKind, TrainSettings};

/// Environment variable that overrides `train.seed`.
pub const SEED_ENV: &str = "BELIEFRL_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub sigma_o: f64,
    pub flicker: f64,
    pub horizon: usize,
    pub transition_var: f64,
    pub step_cap: f64,
    pub action_penalty: f64,
    pub ridge_slope: f64,
    pub ridge_basin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogConfig {
    pub metrics: String,
    pub checkpoint: String,
    pub checkpoint_every: u64,
    pub wall_time: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub agent: AgentSpec,
    pub joint_optim: bool,
    pub n_e: usize,
    pub total_frames: u64,
    pub train: TrainSettings,
    pub log: LogConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mh = MountainHikeParams::default();
        Self {
            env: EnvConfig {
                sigma_o: mh.sigma_o,
                flicker: 0.0,
                horizon: mh.horizon,
                transition_var: mh.transition_var,
                step_cap: mh.step_cap,
                action_penalty: mh.action_penalty,
                ridge_slope: mh.ridge.slope,
                ridge_basin: mh.ridge.basin,
            },
            agent: AgentSpec::default(),
            joint_optim: true,
            n_e: 16,
            total_frames: 1_000_000,
            train: TrainSettings::default(),
            log: LogConfig {
                metrics: "metrics.csv".into(),
                checkpoint: "checkpoint.bin".into(),
                checkpoint_every: 100,
                wall_time: false,
            },
        }
    }
}

struct Reader {
    section: &'static str,
    table: Table,
}

impl Reader {
    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.section)
    }

    fn take(&mut self, k: &str) -> Option<Value> {
        self.table.remove(k)
    }

    fn f64(&mut self, k: &str, slot: &mut f64) -> Result<()> {
        match self.take(k) {
            None => Ok(()),
            Some(Value::Float(v)) => {
                *slot = v;
                Ok(())
            }
            Some(Value::Integer(v)) => {
                *slot = v as f64;
                Ok(())
            }
            Some(other) => Err(Error::config(self.key(k), format!("expected a number, got {}", other.type_str()))),
        }
    }

    fn u64(&mut self, k: &str, slot: &mut u64) -> Result<()> {
        match self.take(k) {
            None => Ok(()),
            Some(Value::Integer(v)) if v >= 0 => {
                *slot = v as u64;
                Ok(())
            }
            Some(other) => Err(Error::config(
                self.key(k),
                format!("expected a non-negative integer, got {other}"),
            )),
        }
    }

    fn usize(&mut self, k: &str, slot: &mut usize) -> Result<()> {
        let mut v = *slot as u64;
        self.u64(k, &mut v)?;
        *slot = usize::try_from(v).map_err(|_| Error::config(self.key(k), "too large"))?;
        Ok(())
    }

    fn bool(&mut self, k: &str, slot: &mut bool) -> Result<()> {
        match self.take(k) {
            None => Ok(()),
            Some(Value::Boolean(v)) => {
                *slot = v;
                Ok(())
            }
            Some(other) => Err(Error::config(self.key(k), format!("expected true or false, got {other}"))),
        }
    }

    fn string(&mut self, k: &str, slot: &mut String) -> Result<()> {
        match self.take(k) {
            None => Ok(()),
            Some(Value::String(v)) => {
                *slot = v;
                Ok(())
            }
            Some(other) => Err(Error::config(self.key(k), format!("expected a string, got {other}"))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.table.keys().next() {
            Some(k) => Err(Error::config(self.key(k), "unknown key")),
            None => Ok(()),
        }
    }
}

fn section(doc: &mut Table, name: &'static str) -> Result<Reader> {
    let table = match doc.remove(name) {
        None => Table::new(),
        Some(Value::Table(t)) => t,
        Some(_) => return Err(Error::config(name, "expected a table")),
    };
    Ok(Reader { section: name, table })
}

/// Parses an override value as a TOML value, falling back to a bare string.
fn override_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

impl RunConfig {
    /// Parses `text`, then applies `section.key=value` overrides in order,
    /// then validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
        for o in overrides {
            let o = o.strip_prefix("--").unwrap_or(o);
            let (path, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o, "override must look like section.key=value"))?;
            let (sec, key) = path
                .split_once('.')
                .ok_or_else(|| Error::config(path, "override key must be section.key"))?;
            let entry = doc
                .entry(sec.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            match entry {
                Value::Table(t) => {
                    t.insert(key.to_string(), override_value(raw));
                }
                _ => return Err(Error::config(sec, "expected a table")),
            }
        }

        let mut cfg = RunConfig::default();
        let mut env = section(&mut doc, "env")?;
        let mut kind = "mountain_hike".to_string();
        env.string("kind", &mut kind)?;
        if kind != "mountain_hike" {
            return Err(Error::config("env.kind", format!("unknown environment `{kind}`")));
        }
        let e = &mut cfg.env;
        env.f64("sigma_o", &mut e.sigma_o)?;
        env.f64("flicker", &mut e.flicker)?;
        env.usize("horizon", &mut e.horizon)?;
        env.f64("transition_var", &mut e.transition_var)?;
        env.f64("step_cap", &mut e.step_cap)?;
        env.f64("action_penalty", &mut e.action_penalty)?;
        env.f64("ridge_slope", &mut e.ridge_slope)?;
        env.f64("ridge_basin", &mut e.ridge_basin)?;
        env.finish()?;

        let mut enc = section(&mut doc, "encoder")?;
        let mut kind = "dvrl".to_string();
        enc.string("kind", &mut kind)?;
        cfg.agent.encoder = match kind.as_str() {
            "dvrl" => EncoderKind::Dvrl,
            "rnn" => EncoderKind::Rnn,
            other => return Err(Error::config("encoder.kind", format!("expected dvrl or rnn, got `{other}`"))),
        };
        let a = &mut cfg.agent;
        enc.usize("particles", &mut a.particles)?;
        enc.usize("h_dim", &mut a.h_dim)?;
        enc.usize("z_dim", &mut a.z_dim)?;
        enc.usize("rnn_h_dim", &mut a.rnn_h_dim)?;
        enc.bool("recon_loss", &mut a.recon_loss)?;
        enc.bool("joint_optim", &mut cfg.joint_optim)?;
        enc.finish()?;

        let mut tr = section(&mut doc, "train")?;
        let t = &mut cfg.train;
        tr.usize("n_e", &mut cfg.n_e)?;
        tr.usize("n_s", &mut t.n_s)?;
        tr.usize("n_g", &mut t.n_g)?;
        tr.f64("gamma", &mut t.gamma)?;
        tr.f64("lambda_h", &mut t.weights.entropy)?;
        tr.f64("lambda_v", &mut t.weights.value)?;
        tr.f64("lambda_e", &mut t.weights.elbo)?;
        tr.f64("lr", &mut t.lr)?;
        tr.f64("rms_alpha", &mut t.rms_alpha)?;
        tr.f64("rms_eps", &mut t.rms_eps)?;
        tr.f64("clip_norm", &mut t.clip_norm)?;
        tr.u64("total_frames", &mut cfg.total_frames)?;
        tr.u64("seed", &mut t.seed)?;
        tr.finish()?;

        let mut log = section(&mut doc, "log")?;
        let l = &mut cfg.log;
        log.string("metrics", &mut l.metrics)?;
        log.string("checkpoint", &mut l.checkpoint)?;
        log.u64("checkpoint_every", &mut l.checkpoint_every)?;
        log.bool("wall_time", &mut l.wall_time)?;
        log.finish()?;

        if let Some(k) = doc.keys().next() {
            return Err(Error::config(k.as_str(), "unknown section"));
        }
        cfg.train.joint_optim = cfg.joint_optim;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, applies overrides, then `BELIEFRL_SEED` if set.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut all = overrides.to_vec();
        if let Ok(seed) = std::env::var(SEED_ENV) {
            all.push(format!("train.seed={seed}"));
        }
        Self::parse(&text, &all)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.n_e == 0 {
            return Err(Error::config("train.n_e", "must be at least 1"));
        }
        if self.agent.particles == 0 {
            return Err(Error::config("encoder.particles", "must be at least 1"));
        }
        for (k, v) in [
            ("encoder.h_dim", self.agent.h_dim),
            ("encoder.z_dim", self.agent.z_dim),
            ("encoder.rnn_h_dim", self.agent.rnn_h_dim),
        ] {
            if v == 0 {
                return Err(Error::config(k, "must be at least 1"));
            }
        }
        if self.agent.recon_loss && self.agent.encoder == EncoderKind::Dvrl {
            return Err(Error::config("encoder.recon_loss", "only applies to the rnn encoder"));
        }
        if !(0.0..=1.0).contains(&self.env.flicker) {
            return Err(Error::config("env.flicker", "must lie in [0, 1]"));
        }
        for (k, v) in [
            ("train.lambda_h", self.train.weights.entropy),
            ("train.lambda_v", self.train.weights.value),
            ("train.lambda_e", self.train.weights.elbo),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(k, "must be finite and ≥ 0"));
            }
        }
        self.mountain_hike()
            .validate()
            .map_err(|e| Error::config("env", e.to_string()))
    }

    pub fn mountain_hike(&self) -> MountainHikeParams {
        let e = &self.env;
        MountainHikeParams {
            sigma_o: e.sigma_o,
            horizon: e.horizon,
            transition_var: e.transition_var,
            step_cap: e.step_cap,
            action_penalty: e.action_penalty,
            ridge: Ridge {
                slope: e.ridge_slope,
                basin: e.ridge_basin,
                ..Ridge::default()
            },
            ..MountainHikeParams::default()
        }
    }

    /// One environment as configured.
    pub fn make_env(&self) -> Result<Box<dyn Env>> {
        let mh = MountainHike::new(self.mountain_hike())?;
        Ok(if self.env.flicker > 0.0 {
            Box::new(Flicker::new(mh, self.env.flicker)?)
        } else {
            Box::new(mh)
        })
    }

    pub fn make_envs(&self, n: usize) -> Result<Vec<Box<dyn Env>>> {
        (0..n).map(|_| self.make_env()).collect()
    }

    /// Canonical text form; parsing it gives back the same configuration.
    pub fn to_toml(&self) -> String {
        let e = &self.env;
        let a = &self.agent;
        let t = &self.train;
        let l = &self.log;
        let s = |x: &str| Value::String(x.to_string()).to_string();
        let f = |x: f64| Value::Float(x).to_string();
        format!(
            "[env]\nkind = \"mountain_hike\"\nsigma_o = {}\nflicker = {}\nhorizon = {}\ntransition_var = {}\nstep_cap = {}\naction_penalty = {}\nridge_slope = {}\nridge_basin = {}\n\n\
             [encoder]\nkind = \"{}\"\nparticles = {}\nh_dim = {}\nz_dim = {}\nrnn_h_dim = {}\nrecon_loss = {}\njoint_optim = {}\n\n\
             [train]\nn_e = {}\nn_s = {}\nn_g = {}\ngamma = {}\nlambda_h = {}\nlambda_v = {}\nlambda_e = {}\nlr = {}\nrms_alpha = {}\nrms_eps = {}\nclip_norm = {}\ntotal_frames = {}\nseed = {}\n\n\
             [log]\nmetrics = {}\ncheckpoint = {}\ncheckpoint_every = {}\nwall_time = {}\n",
            f(e.sigma_o), f(e.flicker), e.horizon, f(e.transition_var), f(e.step_cap), f(e.action_penalty), f(e.ridge_slope), f(e.ridge_basin),
            match a.encoder { EncoderKind::Dvrl => "dvrl", EncoderKind::Rnn => "rnn" },
            a.particles, a.h_dim, a.z_dim, a.rnn_h_dim, a.recon_loss, self.joint_optim,
            self.n_e, t.n_s, t.n_g, f(t.gamma), f(t.weights.entropy), f(t.weights.value), f(t.weights.elbo), f(t.lr), f(t.rms_alpha), f(t.rms_eps), f(t.clip_norm), self.total_frames, t.seed,
            s(&l.metrics), s(&l.checkpoint), l.checkpoint_every, l.wall_time,
        )
    }
}
