use super::{Action, ActionSpace, Env};
use crate::error::{Error, Result};
use crate::rng::{stream, Domain, RngState, StreamRng};

/// Result of stepping every environment once.
#[derive(Debug, Clone, PartialEq)]
pub struct VecStep {
    /// Next observation per env; after a terminal step this is already the
    /// first observation of the new episode.
    pub obs: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Last observation of the finished episode, for envs that just ended.
    pub terminal_obs: Vec<Option<Vec<f64>>>,
    /// Undiscounted return of the episode that just ended.
    pub episode_returns: Vec<Option<f64>>,
}

/// `n_e` environments stepped in lockstep with auto-reset. Environment `i`
/// draws only from stream `(seed, Env, i)`, so its trajectory does not
/// depend on the others.
pub struct VecEnv<E> {
    envs: Vec<E>,
    rngs: Vec<StreamRng>,
    steps: Vec<usize>,
    running_returns: Vec<f64>,
}

impl<E: Env> VecEnv<E> {
    pub fn new(envs: Vec<E>, seed: u64) -> Result<Self> {
        Self::with_domain(envs, seed, Domain::Env)
    }

    /// Like [`new`](Self::new) but drawing from streams `(seed, domain, i)`.
    pub fn with_domain(envs: Vec<E>, seed: u64, domain: Domain) -> Result<Self> {
        if envs.is_empty() {
            return Err(Error::Contract("need at least one environment".into()));
        }
        let space = envs[0].action_space();
        if envs.iter().any(|e| e.action_space() != space || e.obs_dim() != envs[0].obs_dim()) {
            return Err(Error::Contract("environments must share spaces".into()));
        }
        let n = envs.len();
        Ok(Self {
            rngs: (0..n as u64).map(|i| stream(seed, domain, i)).collect(),
            envs,
            steps: vec![0; n],
            running_returns: vec![0.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.envs[0].obs_dim()
    }

    pub fn action_space(&self) -> ActionSpace {
        self.envs[0].action_space()
    }

    pub fn envs(&self) -> &[E] {
        &self.envs
    }

    /// Steps taken in each env's current episode.
    pub fn episode_steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn reset_all(&mut self) -> Vec<Vec<f64>> {
        self.steps.fill(0);
        self.running_returns.fill(0.0);
        self.envs
            .iter_mut()
            .zip(&mut self.rngs)
            .map(|(e, r)| e.reset(r))
            .collect()
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<VecStep> {
        let n = self.envs.len();
        if actions.len() != n {
            return Err(Error::Contract(format!(
                "{} actions for {n} environments",
                actions.len()
            )));
        }
        let mut out = VecStep {
            obs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            terminal_obs: Vec::with_capacity(n),
            episode_returns: Vec::with_capacity(n),
        };
        for i in 0..n {
            let rng = &mut self.rngs[i];
            let tr = self.envs[i].step(&actions[i], rng)?;
            self.steps[i] += 1;
            self.running_returns[i] += tr.reward;
            out.rewards.push(tr.reward);
            out.dones.push(tr.done);
            if tr.done {
                out.terminal_obs.push(Some(tr.obs));
                out.episode_returns.push(Some(self.running_returns[i]));
                self.running_returns[i] = 0.0;
                self.steps[i] = 0;
                out.obs.push(self.envs[i].reset(rng));
            } else {
                out.terminal_obs.push(None);
                out.episode_returns.push(None);
                out.obs.push(tr.obs);
            }
        }
        Ok(out)
    }

    pub fn snapshot(&self) -> VecEnvSnapshot {
        VecEnvSnapshot {
            env_states: self.envs.iter().map(Env::state_vec).collect(),
            rngs: self.rngs.iter().map(RngState::capture).collect(),
            steps: self.steps.clone(),
            running_returns: self.running_returns.clone(),
        }
    }

    pub fn restore(&mut self, snap: &VecEnvSnapshot) -> Result<()> {
        let n = self.envs.len();
        if snap.env_states.len() != n
            || snap.rngs.len() != n
            || snap.steps.len() != n
            || snap.running_returns.len() != n
        {
            return Err(Error::Contract(format!(
                "snapshot for {} environments, have {n}",
                snap.env_states.len()
            )));
        }
        for (e, s) in self.envs.iter_mut().zip(&snap.env_states) {
            e.set_state_vec(s)?;
        }
        self.rngs = snap.rngs.iter().map(RngState::restore).collect();
        self.steps = snap.steps.clone();
        self.running_returns = snap.running_returns.clone();
        Ok(())
    }
}

/// Everything needed to continue a [`VecEnv`] exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct VecEnvSnapshot {
    pub env_states: Vec<Vec<f64>>,
    pub rngs: Vec<RngState>,
    pub steps: Vec<usize>,
    pub running_returns: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{MountainHike, MountainHikeParams};

    fn hikes(n: usize) -> Vec<MountainHike> {
        (0..n)
            .map(|_| MountainHike::new(MountainHikeParams::default()).unwrap())
            .collect()
    }

    fn act(i: usize, t: usize) -> Action {
        Action::Continuous(vec![(i as f64 * 0.1 + t as f64 * 0.01).sin(), 0.3])
    }

    #[test]
    fn single_env_matches_direct_stepping() {
        let mut vec = VecEnv::new(hikes(1), 42).unwrap();
        let mut env = hikes(1).pop().unwrap();
        let mut rng = stream(42, Domain::Env, 0);
        assert_eq!(vec.reset_all()[0], env.reset(&mut rng));
        for t in 0..200 {
            let a = act(0, t);
            let v = vec.step(std::slice::from_ref(&a)).unwrap();
            let tr = env.step(&a, &mut rng).unwrap();
            assert_eq!(v.rewards[0], tr.reward);
            assert_eq!(v.dones[0], tr.done);
            if tr.done {
                assert_eq!(v.terminal_obs[0].as_deref(), Some(tr.obs.as_slice()));
                assert_eq!(v.obs[0], env.reset(&mut rng));
            } else {
                assert_eq!(v.obs[0], tr.obs);
            }
        }
    }

    #[test]
    fn every_env_ends_at_step_75() {
        let mut vec = VecEnv::new(hikes(4), 3).unwrap();
        vec.reset_all();
        for t in 1..=150 {
            let actions: Vec<_> = (0..4).map(|i| act(i, t)).collect();
            let s = vec.step(&actions).unwrap();
            let expect = t % 75 == 0;
            assert!(s.dones.iter().all(|&d| d == expect));
            assert!(s.episode_returns.iter().all(|r| r.is_some() == expect));
        }
    }

    #[test]
    fn same_seed_same_trajectories() {
        let run = || {
            let mut vec = VecEnv::new(hikes(3), 9).unwrap();
            let mut log = vec![vec.reset_all()];
            for t in 0..90 {
                let actions: Vec<_> = (0..3).map(|i| act(i, t)).collect();
                log.push(vec.step(&actions).unwrap().obs);
            }
            log
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn env_trajectory_independent_of_others() {
        // Env 1's trajectory must not depend on how many envs there are
        // or what env 0 does.
        let mut a = VecEnv::new(hikes(2), 5).unwrap();
        let mut b = VecEnv::new(hikes(3), 5).unwrap();
        assert_eq!(a.reset_all()[1], b.reset_all()[1]);
        for t in 0..80 {
            let sa = a.step(&[act(7, t), act(1, t)]).unwrap();
            let sb = b.step(&[act(0, t), act(1, t), act(2, t)]).unwrap();
            assert_eq!(sa.obs[1], sb.obs[1]);
            assert_eq!(sa.rewards[1], sb.rewards[1]);
        }
    }

    #[test]
    fn action_count_checked() {
        let mut vec = VecEnv::new(hikes(2), 1).unwrap();
        vec.reset_all();
        assert!(matches!(vec.step(&[act(0, 0)]), Err(Error::Contract(_))));
    }

    #[test]
    fn snapshot_restores_exactly() {
        let mut vec = VecEnv::new(hikes(2), 1).unwrap();
        vec.reset_all();
        for t in 0..10 {
            vec.step(&[act(0, t), act(1, t)]).unwrap();
        }
        let snap = vec.snapshot();
        let ahead: Vec<_> = (0..5).map(|t| vec.step(&[act(0, t), act(1, t)]).unwrap()).collect();
        vec.restore(&snap).unwrap();
        let again: Vec<_> = (0..5).map(|t| vec.step(&[act(0, t), act(1, t)]).unwrap()).collect();
        assert_eq!(ahead, again);
    }
}
