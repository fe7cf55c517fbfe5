//! Discrete hidden Markov model with action-dependent transition and
//! observation matrices.

use rand::{Rng, RngCore};

use super::{Action, ActionSpace, Env, Transition};
use crate::diffmath::dist::inverse_cdf;
use crate::error::{Error, Result};

/// Tolerance for probability rows summing to one.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHmm {
    /// `transition[a][s][s']`.
    transition: Vec<Vec<Vec<f64>>>,
    /// `observation[a][s'][o]`.
    observation: Vec<Vec<Vec<f64>>>,
    initial: Vec<f64>,
}

fn check_row(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::Domain(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::Domain(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl DiscreteHmm {
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        observation: Vec<Vec<Vec<f64>>>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let n = initial.len();
        if n == 0 {
            return Err(Error::Shape("HMM needs at least one state".into()));
        }
        if transition.is_empty() || transition.len() != observation.len() {
            return Err(Error::Shape(
                "one transition and one observation matrix per action".into(),
            ));
        }
        check_row(&initial, "initial distribution")?;
        let n_obs = observation[0].first().map_or(0, Vec::len);
        if n_obs == 0 {
            return Err(Error::Shape("HMM needs at least one observation symbol".into()));
        }
        for (a, (tm, om)) in transition.iter().zip(&observation).enumerate() {
            if tm.len() != n || om.len() != n {
                return Err(Error::Shape(format!("matrices for action {a} must have {n} rows")));
            }
            for (s, row) in tm.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Shape(format!("transition[{a}][{s}] must have {n} entries")));
                }
                check_row(row, &format!("transition[{a}][{s}]"))?;
            }
            for (s, row) in om.iter().enumerate() {
                if row.len() != n_obs {
                    return Err(Error::Shape(format!(
                        "observation[{a}][{s}] must have {n_obs} entries"
                    )));
                }
                check_row(row, &format!("observation[{a}][{s}]"))?;
            }
        }
        Ok(Self {
            transition,
            observation,
            initial,
        })
    }

    /// Same matrices for every one of `n_actions` actions.
    pub fn uncontrolled(
        transition: Vec<Vec<f64>>,
        observation: Vec<Vec<f64>>,
        initial: Vec<f64>,
        n_actions: usize,
    ) -> Result<Self> {
        Self::new(
            vec![transition; n_actions],
            vec![observation; n_actions],
            initial,
        )
    }

    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn n_obs(&self) -> usize {
        self.observation[0][0].len()
    }

    pub fn n_actions(&self) -> usize {
        self.transition.len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition_row(&self, action: usize, state: usize) -> &[f64] {
        &self.transition[action][state]
    }

    /// `U(o | s', a)`.
    pub fn obs_prob(&self, action: usize, next_state: usize, obs: usize) -> f64 {
        self.observation[action][next_state][obs]
    }

    pub(crate) fn check_indices(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.n_states() {
            return Err(Error::Contract(format!(
                "state {state} out of range 0..{}",
                self.n_states()
            )));
        }
        if action >= self.n_actions() {
            return Err(Error::Contract(format!(
                "action {action} out of range 0..{}",
                self.n_actions()
            )));
        }
        Ok(())
    }

    pub fn sample_initial(&self, rng: &mut dyn RngCore) -> usize {
        inverse_cdf(&self.initial, rng.random())
    }

    pub fn sample_obs(&self, action: usize, next_state: usize, rng: &mut dyn RngCore) -> usize {
        inverse_cdf(&self.observation[action][next_state], rng.random())
    }
}

/// Samples `s' ~ F(·|s, a)` then `o ~ U(·|s', a)`.
pub fn hmm_step(
    model: &DiscreteHmm,
    state: usize,
    action: usize,
    rng: &mut dyn RngCore,
) -> Result<(usize, usize)> {
    model.check_indices(state, action)?;
    let next = inverse_cdf(model.transition_row(action, state), rng.random());
    let obs = model.sample_obs(action, next, rng);
    Ok((next, obs))
}

/// The HMM as an environment: one-hot observations and an optional reward
/// table `reward[s'][a]` (zero when absent). The first observation of an
/// episode is drawn from `U(·|s_0, 0)`.
#[derive(Debug, Clone)]
pub struct HmmEnv {
    pub model: DiscreteHmm,
    rewards: Option<Vec<Vec<f64>>>,
    horizon: usize,
    state: usize,
    t: usize,
}

impl HmmEnv {
    pub fn new(model: DiscreteHmm, rewards: Option<Vec<Vec<f64>>>, horizon: usize) -> Result<Self> {
        if let Some(r) = &rewards {
            if r.len() != model.n_states() || r.iter().any(|row| row.len() != model.n_actions()) {
                return Err(Error::Shape("reward table must be n_states x n_actions".into()));
            }
        }
        Ok(Self {
            model,
            rewards,
            horizon,
            state: 0,
            t: 0,
        })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    fn one_hot(&self, o: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.model.n_obs()];
        v[o] = 1.0;
        v
    }
}

impl Env for HmmEnv {
    fn obs_dim(&self) -> usize {
        self.model.n_obs()
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(self.model.n_actions())
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.state = self.model.sample_initial(rng);
        self.t = 0;
        let o = self.model.sample_obs(0, self.state, rng);
        self.one_hot(o)
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<Transition> {
        let a = match action {
            Action::Discrete(a) => *a,
            Action::Continuous(_) => {
                return Err(Error::Contract("HMM env takes discrete actions".into()))
            }
        };
        let (next, obs) = hmm_step(&self.model, self.state, a, rng)?;
        self.state = next;
        self.t += 1;
        let reward = self.rewards.as_ref().map_or(0.0, |r| r[next][a]);
        Ok(Transition {
            obs: self.one_hot(obs),
            reward,
            done: self.t >= self.horizon,
        })
    }

    fn state_vec(&self) -> Vec<f64> {
        vec![self.state as f64, self.t as f64]
    }

    fn set_state_vec(&mut self, state: &[f64]) -> Result<()> {
        match state {
            [s, t] if (*s as usize) < self.model.n_states() && *s >= 0.0 => {
                self.state = *s as usize;
                self.t = *t as usize;
                Ok(())
            }
            _ => Err(Error::Contract(format!("bad HMM state {state:?}"))),
        }
    }
}
