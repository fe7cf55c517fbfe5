use rand::Rng;

use crate::diffmath::nn::STD_FLOOR;
use crate::diffmath::{
    gaussian_entropy, gaussian_logpdf, Binding, Categorical, DiagGaussian, Linear,
    ParamGroup, ParamId, ParamStore, Tensor, Var,
};
use crate::envs::{standard_normals, Action, ActionSpace};
use crate::error::{Error, Result};

/// `softplus⁻¹(1)`: the initial raw value of the policy's standard deviation.
const UNIT_STD_RAW: f64 = 0.541_324_854_612_918_1;

/// Linear policy over encoder features: a Gaussian with learned,
/// state-independent std for continuous actions, or a softmax.
#[derive(Debug, Clone, Copy)]
pub enum PolicyHead {
    Gaussian { mean: Linear, std_raw: ParamId },
    Categorical { logits: Linear },
}

pub enum PolicyDist {
    Gaussian(DiagGaussian),
    Categorical(Categorical),
}

impl PolicyHead {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, d_in: usize, space: ActionSpace, rng: &mut R) -> Self {
        let g = ParamGroup::Policy;
        match space {
            ActionSpace::Continuous(d) => PolicyHead::Gaussian {
                mean: Linear::new(store, "policy.mean", g, d_in, d, rng),
                std_raw: store.add("policy.std_raw", g, Tensor::filled(1, d, UNIT_STD_RAW)),
            },
            ActionSpace::Discrete(n) => PolicyHead::Categorical {
                logits: Linear::new(store, "policy.logits", g, d_in, n, rng),
            },
        }
    }

    pub fn forward(&self, bind: &Binding, features: &Var) -> Result<PolicyDist> {
        match self {
            PolicyHead::Gaussian { mean, std_raw } => {
                let m = mean.forward(bind, features)?;
                let std = bind
                    .get(*std_raw)
                    .softplus()
                    .add_scalar(STD_FLOOR)
                    .repeat_rows(features.rows());
                Ok(PolicyDist::Gaussian(DiagGaussian::new(m, std)?))
            }
            PolicyHead::Categorical { logits } => {
                Ok(PolicyDist::Categorical(Categorical::new(logits.forward(bind, features)?)?))
            }
        }
    }
}

impl PolicyDist {
    pub fn sample(&self, rng: &mut dyn rand::RngCore) -> Vec<Action> {
        match self {
            PolicyDist::Gaussian(g) => {
                let (n, d) = g.mean.shape();
                let eps = standard_normals(rng, n * d);
                let (mu, sd) = (g.mean.value().data(), g.std.value().data());
                (0..n)
                    .map(|i| {
                        Action::Continuous((0..d).map(|j| mu[i * d + j] + sd[i * d + j] * eps[i * d + j]).collect())
                    })
                    .collect()
            }
            PolicyDist::Categorical(c) => c.sample(rng).into_iter().map(Action::Discrete).collect(),
        }
    }

    /// Mean action, or the most probable one.
    pub fn mode(&self) -> Vec<Action> {
        match self {
            PolicyDist::Gaussian(g) => (0..g.rows())
                .map(|i| Action::Continuous(g.mean.value().row_slice(i).to_vec()))
                .collect(),
            PolicyDist::Categorical(c) => c.mode().into_iter().map(Action::Discrete).collect(),
        }
    }

    /// `log π(a)` per row.
    pub fn log_prob(&self, actions: &[Action]) -> Result<Var> {
        match self {
            PolicyDist::Gaussian(g) => {
                let rows: Result<Vec<Vec<f64>>> = actions
                    .iter()
                    .map(|a| match a {
                        Action::Continuous(v) => Ok(v.clone()),
                        Action::Discrete(_) => Err(Error::Contract("discrete action for a Gaussian policy".into())),
                    })
                    .collect();
                gaussian_logpdf(&Var::leaf(Tensor::from_rows(&rows?)?), g)
            }
            PolicyDist::Categorical(c) => {
                let idx: Result<Vec<usize>> = actions
                    .iter()
                    .map(|a| match a {
                        Action::Discrete(i) => Ok(*i),
                        Action::Continuous(_) => Err(Error::Contract("continuous action for a softmax policy".into())),
                    })
                    .collect();
                c.log_prob(&idx?)
            }
        }
    }

    pub fn entropy(&self) -> Var {
        match self {
            PolicyDist::Gaussian(g) => gaussian_entropy(g),
            PolicyDist::Categorical(c) => c.entropy(),
        }
    }
}
