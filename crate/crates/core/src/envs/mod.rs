//! Partially observable environments and a synchronous vectorised stepper.

mod flicker;
mod hmm;
mod lgss;
mod mountain_hike;
mod vec_env;

pub use flicker::{flicker_wrap, Flicker};
pub use hmm::{hmm_step, DiscreteHmm, HmmEnv, ROW_SUM_TOL};
pub use lgss::{lgss_step, LgssEnv, LinearGaussianSsm};
pub use mountain_hike::{MountainHike, MountainHikeParams, Ridge};
pub use vec_env::{VecEnv, VecEnvSnapshot, VecStep};

use rand::RngCore;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSpace {
    /// Real vectors of the given dimension.
    Continuous(usize),
    /// Indices `0..n`.
    Discrete(usize),
}

impl ActionSpace {
    /// Width of the action as fed to the agent (one-hot for discrete).
    pub fn input_dim(self) -> usize {
        match self {
            ActionSpace::Continuous(d) | ActionSpace::Discrete(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

impl Action {
    /// The no-op action: zero vector or index 0.
    pub fn no_op(space: ActionSpace) -> Self {
        match space {
            ActionSpace::Continuous(d) => Action::Continuous(vec![0.0; d]),
            ActionSpace::Discrete(_) => Action::Discrete(0),
        }
    }

    /// Agent-side encoding: the vector itself, or one-hot.
    pub fn encode(&self, space: ActionSpace) -> Vec<f64> {
        match (self, space) {
            (Action::Continuous(v), _) => v.clone(),
            (Action::Discrete(a), ActionSpace::Discrete(n)) => {
                let mut v = vec![0.0; n];
                if *a < n {
                    v[*a] = 1.0;
                }
                v
            }
            (Action::Discrete(a), ActionSpace::Continuous(_)) => vec![*a as f64],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// A POMDP the agent interacts with through observations only.
///
/// Implementations draw all randomness from the generator they are handed,
/// so a trajectory is a function of the stream alone.
pub trait Env {
    fn obs_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn horizon(&self) -> usize;
    /// Starts a new episode and returns its first observation.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<Transition>;
    /// Flat snapshot of the hidden state, including the step counter.
    fn state_vec(&self) -> Vec<f64>;
    fn set_state_vec(&mut self, state: &[f64]) -> Result<()>;
}

impl<E: Env + ?Sized> Env for Box<E> {
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn action_space(&self) -> ActionSpace {
        (**self).action_space()
    }
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        (**self).reset(rng)
    }
    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<Transition> {
        (**self).step(action, rng)
    }
    fn state_vec(&self) -> Vec<f64> {
        (**self).state_vec()
    }
    fn set_state_vec(&mut self, state: &[f64]) -> Result<()> {
        (**self).set_state_vec(state)
    }
}

pub fn standard_normals(rng: &mut dyn RngCore, n: usize) -> Vec<f64> {
    use rand::Rng;
    (0..n)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}
