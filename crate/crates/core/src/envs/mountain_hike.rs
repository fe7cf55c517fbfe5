//! Mountain Hike: walk along a ridge in the plane from noisy position
//! readings.
//!
//! `s' = s + ã + ε_s` with `ã` the action capped to length `step_cap`,
//! `o = s' + ε_o`, reward `r(s') − action_penalty·‖a‖` using the raw action
//! norm. Noise scales are covariances: `ε_s ~ N(0, transition_var·I)`,
//! `ε_o ~ N(0, sigma_o·I)`.
//!
//! The reward surface `r` is a surrogate: `−slope · d(p) − basin`, where `d`
//! is the Euclidean distance from `p` to a ridge polyline. It is maximal on
//! the ridge and Lipschitz with constant `slope`. The default ridge is the
//! single straight segment from the start mean to its mirror image.

use rand::RngCore;

use super::{standard_normals, Action, ActionSpace, Env, Transition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    pub vertices: Vec<[f64; 2]>,
    pub slope: f64,
    pub basin: f64,
}

impl Default for Ridge {
    fn default() -> Self {
        Self {
            vertices: vec![[-8.5, -8.5], [8.5, 8.5]],
            slope: 0.1,
            basin: 0.0,
        }
    }
}

impl Ridge {
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        match self.vertices.as_slice() {
            [] => 0.0,
            [only] => norm([p[0] - only[0], p[1] - only[1]]),
            vs => vs
                .windows(2)
                .map(|w| segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn reward(&self, x: f64, y: f64) -> f64 {
        -self.slope * self.distance([x, y]) - self.basin
    }

    /// Lipschitz constant of [`reward`](Self::reward).
    pub fn lipschitz(&self) -> f64 {
        self.slope.abs()
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm([ap[0] - t * ab[0], ap[1] - t * ab[1]])
}

#[derive(Debug, Clone, PartialEq)]
pub struct MountainHikeParams {
    pub transition_var: f64,
    pub sigma_o: f64,
    pub step_cap: f64,
    pub action_penalty: f64,
    pub horizon: usize,
    pub start_mean: [f64; 2],
    pub start_var: f64,
    pub ridge: Ridge,
}

impl Default for MountainHikeParams {
    fn default() -> Self {
        Self {
            transition_var: 0.25,
            sigma_o: 3.0,
            step_cap: 0.5,
            action_penalty: 0.01,
            horizon: 75,
            start_mean: [-8.5, -8.5],
            start_var: 1.0,
            ridge: Ridge::default(),
        }
    }
}

impl MountainHikeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Contract(format!("mountain hike: {what}")));
        if !(self.sigma_o >= 0.0 && self.sigma_o.is_finite()) {
            return bad("sigma_o must be finite and ≥ 0");
        }
        if !(self.step_cap > 0.0 && self.step_cap.is_finite()) {
            return bad("step cap must be positive");
        }
        if !(self.transition_var >= 0.0 && self.start_var >= 0.0) {
            return bad("variances must be ≥ 0");
        }
        if self.horizon == 0 {
            return bad("horizon must be ≥ 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MountainHike {
    pub params: MountainHikeParams,
    pos: [f64; 2],
    t: usize,
}

impl MountainHike {
    pub fn new(params: MountainHikeParams) -> Result<Self> {
        params.validate()?;
        let pos = params.start_mean;
        Ok(Self { params, pos, t: 0 })
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn set_position(&mut self, pos: [f64; 2]) {
        self.pos = pos;
    }

    pub fn elapsed(&self) -> usize {
        self.t
    }

    pub fn reward_surface(&self, x: f64, y: f64) -> f64 {
        self.params.ridge.reward(x, y)
    }

    /// The action scaled down to length `step_cap` if it is longer.
    pub fn cap_action(&self, a: [f64; 2]) -> [f64; 2] {
        let n = norm(a);
        if n > self.params.step_cap {
            let s = self.params.step_cap / n;
            [a[0] * s, a[1] * s]
        } else {
            a
        }
    }

    /// One transition with the standard-normal noise supplied explicitly.
    /// Returns `(next state, observation, reward)`.
    pub fn transition(
        &self,
        state: [f64; 2],
        action: [f64; 2],
        eps_s: [f64; 2],
        eps_o: [f64; 2],
    ) -> ([f64; 2], [f64; 2], f64) {
        let step = self.cap_action(action);
        let ss = self.params.transition_var.sqrt();
        let so = self.params.sigma_o.sqrt();
        let next = [
            state[0] + step[0] + ss * eps_s[0],
            state[1] + step[1] + ss * eps_s[1],
        ];
        let obs = [next[0] + so * eps_o[0], next[1] + so * eps_o[1]];
        let reward = self.reward_surface(next[0], next[1]) - self.params.action_penalty * norm(action);
        (next, obs, reward)
    }
}

impl Env for MountainHike {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous(2)
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let e = standard_normals(rng, 4);
        let sd = self.params.start_var.sqrt();
        let so = self.params.sigma_o.sqrt();
        self.pos = [
            self.params.start_mean[0] + sd * e[0],
            self.params.start_mean[1] + sd * e[1],
        ];
        self.t = 0;
        vec![self.pos[0] + so * e[2], self.pos[1] + so * e[3]]
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<Transition> {
        let a = match action {
            Action::Continuous(v) if v.len() == 2 && v.iter().all(|x| x.is_finite()) => [v[0], v[1]],
            other => {
                return Err(Error::Contract(format!(
                    "mountain hike needs a finite 2-d action, got {other:?}"
                )))
            }
        };
        let e = standard_normals(rng, 4);
        let (next, obs, reward) = self.transition(self.pos, a, [e[0], e[1]], [e[2], e[3]]);
        self.pos = next;
        self.t += 1;
        Ok(Transition {
            obs: obs.to_vec(),
            reward,
            done: self.t >= self.params.horizon,
        })
    }

    fn state_vec(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.t as f64]
    }

    fn set_state_vec(&mut self, state: &[f64]) -> Result<()> {
        match state {
            [x, y, t] if *t >= 0.0 && t.fract() == 0.0 => {
                self.pos = [*x, *y];
                self.t = *t as usize;
                Ok(())
            }
            _ => Err(Error::Contract(format!("bad mountain hike state {state:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn hike(sigma_o: f64) -> MountainHike {
        MountainHike::new(MountainHikeParams {
            sigma_o,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn long_actions_are_capped() {
        let env = hike(0.0);
        assert_eq!(env.cap_action([1.0, 0.0]), [0.5, 0.0]);
        let (next, _, _) = env.transition([0.0, 0.0], [1.0, 0.0], [0.0; 2], [0.0; 2]);
        assert_eq!(next, [0.5, 0.0]);
    }

    #[test]
    fn short_actions_pass_through() {
        let env = hike(1.5);
        let (next, obs, _) = env.transition([1.0, 2.0], [0.3, 0.0], [0.0; 2], [0.0; 2]);
        assert_eq!(next, [1.3, 2.0]);
        assert_eq!(obs, next);
    }

    #[test]
    fn zero_observation_noise_observes_state() {
        let env = hike(0.0);
        let (next, obs, _) = env.transition([-3.0, 4.0], [0.1, 0.2], [0.7, -1.2], [5.0, 5.0]);
        assert_eq!(obs, next);
    }

    #[test]
    fn penalty_uses_raw_norm() {
        let env = hike(0.0);
        let (next, _, r) = env.transition([0.0, 0.0], [0.3, 0.4], [0.0; 2], [0.0; 2]);
        let expect = env.reward_surface(next[0], next[1]) - 0.005;
        assert!((r - expect).abs() < 1e-15);
        let (next, _, r) = env.transition([0.0, 0.0], [3.0, 4.0], [0.0; 2], [0.0; 2]);
        assert!((r - (env.reward_surface(next[0], next[1]) - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn reward_surface_shape() {
        let ridge = Ridge::default();
        // Maximal on the ridge along a crossing line.
        let on = ridge.reward(1.0, 1.0);
        for d in [-2.0, -0.5, 0.25, 1.0, 3.0] {
            assert!(ridge.reward(1.0 + d, 1.0 - d) <= on);
        }
        // Mirror points about the ridge are equidistant.
        assert!((ridge.reward(2.0, -1.0) - ridge.reward(-1.0, 2.0)).abs() < 1e-12);
        assert_eq!(on, 0.0);
    }

    #[test]
    fn episode_lasts_horizon() {
        let mut env = hike(3.0);
        let mut rng = stream(1, Domain::Env, 0);
        env.reset(&mut rng);
        for t in 1..=75 {
            let tr = env.step(&Action::Continuous(vec![10.0, -3.0]), &mut rng).unwrap();
            assert_eq!(tr.done, t == 75);
        }
    }

    #[test]
    fn rejects_bad_actions() {
        let mut env = hike(0.0);
        let mut rng = stream(1, Domain::Env, 0);
        assert!(env.step(&Action::Continuous(vec![f64::NAN, 0.0]), &mut rng).is_err());
        assert!(env.step(&Action::Discrete(1), &mut rng).is_err());
    }
}
