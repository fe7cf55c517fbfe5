//! A plain particle filter over `f64` models, used to check the particle
//! machinery against the exact oracles.

use nalgebra::{Cholesky, DVector, Dyn};
use rand::{Rng, RngCore};

use super::weights::{elbo_term_value, ess, resample_ancestors};
use crate::diffmath::dist::inverse_cdf;
use crate::envs::{DiscreteHmm, LinearGaussianSsm};
use crate::error::{Error, Result};

/// A model with a proposal for a particle filter. Steps are 1-based.
pub trait SmcModel {
    type Particle: Clone;
    fn steps(&self) -> usize;
    fn initial(&self, rng: &mut dyn RngCore) -> Self::Particle;
    /// Draws `s_t` given its ancestor and returns it with `log w_t`.
    fn propagate(
        &self,
        t: usize,
        prev: &Self::Particle,
        rng: &mut dyn RngCore,
    ) -> Result<(Self::Particle, f64)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmcOutput {
    /// `log((1/K) Σ_k w_t^k)` per step.
    pub elbo_terms: Vec<f64>,
    /// Per-step incremental log-weights (not accumulated).
    pub log_weights: Vec<Vec<f64>>,
    pub ess: Vec<f64>,
}

impl SmcOutput {
    pub fn elbo(&self) -> f64 {
        self.elbo_terms.iter().sum()
    }
}

/// Runs `K` particles for `model.steps()` steps. With `resample` the
/// ancestors are redrawn before every step after the first; without it each
/// particle keeps its own lineage. `visit(t, particles, logw)` sees the
/// belief after step `t`; without resampling its weights are accumulated.
pub fn run_smc<M: SmcModel>(
    model: &M,
    k: usize,
    resample: bool,
    rng: &mut dyn RngCore,
    mut visit: impl FnMut(usize, &[M::Particle], &[f64]) -> Result<()>,
) -> Result<SmcOutput> {
    if k == 0 {
        return Err(Error::Contract("need at least one particle".into()));
    }
    let mut particles: Vec<M::Particle> = (0..k).map(|_| model.initial(rng)).collect();
    let mut logw = vec![0.0; k];
    let mut total = vec![0.0; k];
    let mut out = SmcOutput {
        elbo_terms: Vec::with_capacity(model.steps()),
        log_weights: Vec::with_capacity(model.steps()),
        ess: Vec::with_capacity(model.steps()),
    };
    for t in 1..=model.steps() {
        let ancestors: Vec<usize> = if resample && t > 1 {
            resample_ancestors(&logw, rng)?
        } else {
            (0..k).collect()
        };
        let mut next = Vec::with_capacity(k);
        for (j, &u) in ancestors.iter().enumerate() {
            let (p, w) = model.propagate(t, &particles[u], rng)?;
            next.push(p);
            logw[j] = w;
        }
        particles = next;
        out.elbo_terms.push(elbo_term_value(&logw)?);
        out.log_weights.push(logw.clone());
        if resample {
            out.ess.push(ess(&logw)?);
            visit(t, &particles, &logw)?;
        } else {
            for (acc, w) in total.iter_mut().zip(&logw) {
                *acc += w;
            }
            out.ess.push(ess(&total)?);
            visit(t, &particles, &total)?;
        }
    }
    Ok(out)
}

/// Linear-Gaussian model with the transition prior as proposal.
pub struct LgssBootstrap<'a> {
    model: &'a LinearGaussianSsm,
    obs: &'a [DVector<f64>],
    actions: &'a [DVector<f64>],
    r_chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl<'a> LgssBootstrap<'a> {
    pub fn new(
        model: &'a LinearGaussianSsm,
        obs: &'a [DVector<f64>],
        actions: &'a [DVector<f64>],
    ) -> Result<Self> {
        if obs.len() != actions.len() {
            return Err(Error::Shape("one action per observation".into()));
        }
        let r_chol = model
            .r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Domain("R must be positive definite for weighting".into()))?;
        let log_det: f64 = 2.0 * r_chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let log_norm = -0.5 * (log_det + model.obs_dim() as f64 * 1.837_877_066_409_345_5);
        Ok(Self {
            model,
            obs,
            actions,
            r_chol,
            log_norm,
        })
    }
}

impl SmcModel for LgssBootstrap<'_> {
    type Particle = DVector<f64>;

    fn steps(&self) -> usize {
        self.obs.len()
    }

    fn initial(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        self.model.sample_initial(rng)
    }

    fn propagate(
        &self,
        t: usize,
        prev: &DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<(DVector<f64>, f64)> {
        let a = &self.actions[t - 1];
        let next = self.model.transition(prev, a, rng)?;
        let v = &self.obs[t - 1] - &self.model.c * &next;
        let logw = self.log_norm - 0.5 * v.dot(&self.r_chol.solve(&v));
        Ok((next, logw))
    }
}

/// Discrete HMM with the transition prior as proposal.
pub struct HmmBootstrap<'a> {
    pub model: &'a DiscreteHmm,
    /// `a_0..a_{T−1}`.
    pub actions: &'a [usize],
    /// `o_1..o_T`.
    pub obs: &'a [usize],
}

impl SmcModel for HmmBootstrap<'_> {
    type Particle = usize;

    fn steps(&self) -> usize {
        self.obs.len()
    }

    fn initial(&self, rng: &mut dyn RngCore) -> usize {
        self.model.sample_initial(rng)
    }

    fn propagate(&self, t: usize, prev: &usize, rng: &mut dyn RngCore) -> Result<(usize, f64)> {
        let a = self.actions[t - 1];
        let next = inverse_cdf(self.model.transition_row(a, *prev), rng.random());
        Ok((next, self.model.obs_prob(a, next, self.obs[t - 1]).ln()))
    }
}

/// Weighted state histograms after each step of a bootstrap filter.
pub fn hmm_filter_histograms(
    model: &DiscreteHmm,
    actions: &[usize],
    obs: &[usize],
    k: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<f64>>> {
    let n = model.n_states();
    let mut hists = Vec::with_capacity(obs.len());
    let filter = HmmBootstrap { model, actions, obs };
    run_smc(&filter, k, true, rng, |_, parts, logw| {
        hists.push(super::particle_belief_to_histogram(parts, logw, n, |&s| Some(s))?);
        Ok(())
    })?;
    Ok(hists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{exact_belief_update, iwae_elbo, kalman_log_marginal, total_variation, ExactBelief};
    use crate::rng::{stream, Domain};

    fn lgss_data(seed: u64, t: usize) -> (LinearGaussianSsm, Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let m = LinearGaussianSsm::scalar(0.9, 1.0, 0.3, 0.5, 0.0, 1.0).unwrap();
        let mut rng = stream(seed, Domain::Env, 0);
        let mut s = m.sample_initial(&mut rng);
        let acts = vec![DVector::zeros(1); t];
        let obs = acts
            .iter()
            .map(|a| {
                let (n, o) = crate::envs::lgss_step(&m, &s, a, &mut rng).unwrap();
                s = n;
                o
            })
            .collect();
        (m, obs, acts)
    }

    #[test]
    fn many_particles_approach_kalman() {
        let (m, obs, acts) = lgss_data(0, 10);
        let exact = kalman_log_marginal(&m, &obs, &acts).unwrap();
        let f = LgssBootstrap::new(&m, &obs, &acts).unwrap();
        let mut rng = stream(1, Domain::Agent, 0);
        let est = run_smc(&f, 5000, true, &mut rng, |_, _, _| Ok(())).unwrap().elbo();
        assert!((est - exact).abs() < 0.05 * exact.abs(), "{est} vs {exact}");
    }

    #[test]
    fn single_particle_iwae_equals_smc() {
        let (m, obs, acts) = lgss_data(3, 12);
        let f = LgssBootstrap::new(&m, &obs, &acts).unwrap();
        let a = run_smc(&f, 1, true, &mut stream(4, Domain::Agent, 0), |_, _, _| Ok(())).unwrap();
        let b = run_smc(&f, 1, false, &mut stream(4, Domain::Agent, 0), |_, _, _| Ok(())).unwrap();
        assert_eq!(a.elbo(), iwae_elbo(&b.log_weights).unwrap());
    }

    #[test]
    fn hmm_histograms_track_exact_belief() {
        let m = DiscreteHmm::uncontrolled(
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            vec![0.5, 0.5],
            1,
        )
        .unwrap();
        let obs = [0, 0, 1, 1, 1, 0, 1, 0, 0, 0];
        let acts = [0; 10];
        let hists = hmm_filter_histograms(&m, &acts, &obs, 10_000, &mut stream(5, Domain::Agent, 0)).unwrap();
        let mut b = ExactBelief::initial(&m);
        for (h, &o) in hists.iter().zip(&obs) {
            b = exact_belief_update(&m, &b, 0, o).unwrap().0;
            assert!(total_variation(h, b.probs()) < 0.05);
        }
    }
}
