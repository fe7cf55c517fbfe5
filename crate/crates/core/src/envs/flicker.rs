use rand::{Rng, RngCore};

use super::{Action, ActionSpace, Env, Transition};
use crate::error::{Error, Result};

/// Replaces `obs` by zeros with probability `p_blank`. Always draws exactly
/// one uniform so the stream advances the same way for every `p_blank`.
pub fn flicker_wrap(obs: &[f64], rng: &mut dyn RngCore, p_blank: f64) -> Vec<f64> {
    let u: f64 = rng.random();
    if u < p_blank {
        vec![0.0; obs.len()]
    } else {
        obs.to_vec()
    }
}

/// Blanks each observation of the wrapped environment independently.
#[derive(Debug, Clone)]
pub struct Flicker<E> {
    pub inner: E,
    p_blank: f64,
}

impl<E: Env> Flicker<E> {
    pub fn new(inner: E, p_blank: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_blank) {
            return Err(Error::Contract(format!("p_blank {p_blank} outside [0, 1]")));
        }
        Ok(Self { inner, p_blank })
    }

    pub fn p_blank(&self) -> f64 {
        self.p_blank
    }
}

impl<E: Env> Env for Flicker<E> {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn action_space(&self) -> ActionSpace {
        self.inner.action_space()
    }

    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let obs = self.inner.reset(rng);
        flicker_wrap(&obs, rng, self.p_blank)
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<Transition> {
        let mut tr = self.inner.step(action, rng)?;
        tr.obs = flicker_wrap(&tr.obs, rng, self.p_blank);
        Ok(tr)
    }

    fn state_vec(&self) -> Vec<f64> {
        self.inner.state_vec()
    }

    fn set_state_vec(&mut self, state: &[f64]) -> Result<()> {
        self.inner.set_state_vec(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn blank_fraction(p: f64) -> f64 {
        let mut rng = stream(11, Domain::Env, 0);
        let obs = [1.5, -2.0];
        let n = 10_000;
        let blanks = (0..n)
            .filter(|_| {
                let o = flicker_wrap(&obs, &mut rng, p);
                if o == [0.0, 0.0] {
                    true
                } else {
                    assert_eq!(o, obs);
                    false
                }
            })
            .count();
        blanks as f64 / n as f64
    }

    #[test]
    fn never_blank_at_zero() {
        assert_eq!(blank_fraction(0.0), 0.0);
    }

    #[test]
    fn always_blank_at_one() {
        assert_eq!(blank_fraction(1.0), 1.0);
    }

    #[test]
    fn half_blank_rate() {
        let f = blank_fraction(0.5);
        assert!((f - 0.5).abs() <= 0.02, "{f}");
    }

    #[test]
    fn rejects_bad_probability() {
        let env = super::super::MountainHike::new(Default::default()).unwrap();
        assert!(Flicker::new(env.clone(), 1.5).is_err());
        assert!(Flicker::new(env, -0.1).is_err());
    }
}
