//! History encoders: a GRU baseline and the particle-belief encoder.

mod dvrl;
mod lgss;
mod particle;
mod rnn;

pub use dvrl::{Bootstrap, DvrlCtx, DvrlDims, DvrlModel, TiedProposal, EMBED_DIM};
pub use lgss::LgssParticleModel;
pub use particle::{
    particle_step, FrozenNoise, NoiseTape, ParticleBelief, ParticleModel, ParticleStep, RngNoise,
    StepNoise,
};
pub use rnn::RnnEncoder;

use crate::diffmath::{Binding, Var};
use crate::error::{Error, Result};

/// Encoder state carried between steps, for a batch of environments.
#[derive(Debug, Clone)]
pub enum Latent {
    Rnn(Var),
    Dvrl(ParticleBelief),
}

impl Latent {
    /// What the policy and value heads see: `h` or the particle summary.
    pub fn features(&self) -> &Var {
        match self {
            Latent::Rnn(h) => h,
            Latent::Dvrl(b) => b.summary.as_ref().expect("particle encoder keeps a summary"),
        }
    }

    pub fn batch(&self) -> usize {
        match self {
            Latent::Rnn(h) => h.rows(),
            Latent::Dvrl(b) => b.batch(),
        }
    }

    pub fn detach(&self) -> Self {
        match self {
            Latent::Rnn(h) => Latent::Rnn(h.detach()),
            Latent::Dvrl(b) => Latent::Dvrl(b.detach()),
        }
    }

    /// Replaces the rows of environments with `reset[i]` by those of `init`.
    pub fn select_reset(&self, init: &Latent, reset: &[bool]) -> Result<Self> {
        if !reset.iter().any(|&r| r) {
            return Ok(self.clone());
        }
        match (self, init) {
            (Latent::Rnn(h), Latent::Rnn(h0)) => {
                let n = h.rows();
                if reset.len() != n || h0.rows() != n {
                    return Err(Error::Shape("reset mask does not match batch".into()));
                }
                let idx: Vec<usize> = (0..n).map(|i| if reset[i] { n + i } else { i }).collect();
                Ok(Latent::Rnn(Var::concat_rows(&[h.clone(), h0.clone()]).gather_rows(&idx)))
            }
            (Latent::Dvrl(b), Latent::Dvrl(b0)) => Ok(Latent::Dvrl(b.select(b0, reset)?)),
            _ => Err(Error::Contract("latent kinds differ".into())),
        }
    }

    /// Mean effective sample size over the batch, for particle latents.
    pub fn mean_ess(&self) -> Result<Option<f64>> {
        match self {
            Latent::Rnn(_) => Ok(None),
            Latent::Dvrl(b) => {
                let e = b.ess()?;
                Ok(Some(e.iter().sum::<f64>() / e.len() as f64))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Encoder {
    Rnn(RnnEncoder),
    Dvrl { model: DvrlModel, particles: usize },
}

/// Output of one encoder step.
pub struct EncoderStep {
    pub latent: Latent,
    /// Per-environment term whose negated mean is the auxiliary loss: the
    /// SMC bound summand, or `log p(o_t | h_{t−1})` for the GRU with
    /// reconstruction. `B × 1`.
    pub aux: Option<Var>,
}

impl Encoder {
    pub fn feature_dim(&self) -> usize {
        match self {
            Encoder::Rnn(r) => r.d_h,
            Encoder::Dvrl { model, .. } => model.summary_dim(),
        }
    }

    pub fn has_aux(&self) -> bool {
        match self {
            Encoder::Rnn(r) => r.has_recon(),
            Encoder::Dvrl { .. } => true,
        }
    }

    pub fn initial(&self, bind: &Binding, batch: usize, noise: &mut dyn StepNoise) -> Result<Latent> {
        match self {
            Encoder::Rnn(r) => Ok(Latent::Rnn(r.initial(batch))),
            Encoder::Dvrl { model, particles } => {
                Ok(Latent::Dvrl(model.initial(bind, batch, *particles, noise)?))
            }
        }
    }

    /// Consumes `(a_{t−1}, o_t)` and returns the new latent; reads nothing
    /// but the previous latent and these two inputs.
    pub fn step(
        &self,
        bind: &Binding,
        latent: &Latent,
        a_prev: &Var,
        obs: &Var,
        noise: &mut dyn StepNoise,
    ) -> Result<EncoderStep> {
        match (self, latent) {
            (Encoder::Rnn(r), Latent::Rnn(h)) => {
                let (next, recon) = r.step(bind, h, a_prev, obs)?;
                Ok(EncoderStep {
                    latent: Latent::Rnn(next),
                    aux: recon.map(|l| l.neg()),
                })
            }
            (Encoder::Dvrl { model, .. }, Latent::Dvrl(b)) => {
                let s = particle_step(model, bind, b, a_prev, obs, noise, true)?;
                Ok(EncoderStep {
                    latent: Latent::Dvrl(s.belief),
                    aux: Some(s.elbo_term),
                })
            }
            _ => Err(Error::Contract("latent does not belong to this encoder".into())),
        }
    }
}
