use crate::diffmath::{Binding, Linear, ParamGroup, ParamStore, Var};
use crate::encoders::{DvrlDims, DvrlModel, Encoder, RnnEncoder};
use crate::envs::ActionSpace;
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

use super::policy::{PolicyDist, PolicyHead};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Rnn,
    Dvrl,
}

/// Architecture of an agent, independent of the environment's spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentSpec {
    pub encoder: EncoderKind,
    pub particles: usize,
    pub h_dim: usize,
    pub z_dim: usize,
    pub rnn_h_dim: usize,
    pub recon_loss: bool,
}

impl Default for AgentSpec {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Dvrl,
            particles: 30,
            h_dim: 128,
            z_dim: 128,
            rnn_h_dim: 256,
            recon_loss: false,
        }
    }
}

/// Encoder, policy and value head with their parameters.
#[derive(Debug, Clone)]
pub struct Agent {
    pub spec: AgentSpec,
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub store: ParamStore,
    pub encoder: Encoder,
    pub policy: PolicyHead,
    pub value: Linear,
}

impl Agent {
    /// Parameters are drawn from the `Init` stream of `seed`.
    pub fn new(spec: AgentSpec, obs_dim: usize, action_space: ActionSpace, seed: u64) -> Result<Self> {
        if spec.encoder == EncoderKind::Dvrl && spec.particles == 0 {
            return Err(Error::Contract("particle encoder needs K ≥ 1".into()));
        }
        let mut rng = stream(seed, Domain::Init, 0);
        let mut store = ParamStore::new();
        let d_a = action_space.input_dim();
        let encoder = match spec.encoder {
            EncoderKind::Rnn => Encoder::Rnn(RnnEncoder::new(&mut store, obs_dim, d_a, spec.rnn_h_dim, spec.recon_loss, &mut rng)),
            EncoderKind::Dvrl => {
                let dims = DvrlDims {
                    obs: obs_dim,
                    action: d_a,
                    h: spec.h_dim,
                    z: spec.z_dim,
                };
                Encoder::Dvrl {
                    model: DvrlModel::new(&mut store, dims, &mut rng),
                    particles: spec.particles,
                }
            }
        };
        let d = encoder.feature_dim();
        let policy = PolicyHead::new(&mut store, d, action_space, &mut rng);
        let value = Linear::new(&mut store, "value", ParamGroup::Value, d, 1, &mut rng);
        Ok(Self {
            spec,
            obs_dim,
            action_space,
            store,
            encoder,
            policy,
            value,
        })
    }

    pub fn heads(&self, bind: &Binding, features: &Var) -> Result<(PolicyDist, Var)> {
        Ok((self.policy.forward(bind, features)?, self.value.forward(bind, features)?))
    }
}
