//! Exact Bayes filter for discrete HMMs and histograms of particle beliefs.

use crate::envs::{DiscreteHmm, ROW_SUM_TOL};
use crate::error::{Error, Result};

use super::weights::normalized_weights;

/// Probability vector over the states of a discrete model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactBelief(Vec<f64>);

impl ExactBelief {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Domain("belief entries must be finite and non-negative".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Domain(format!("belief sums to {s}, not 1")));
        }
        Ok(Self(p))
    }

    pub fn initial(model: &DiscreteHmm) -> Self {
        Self(model.initial().to_vec())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `b'(s') ∝ U(o|s',a) Σ_s F(s'|s,a) b(s)`, returned with `log p(o | history)`.
pub fn exact_belief_update(
    model: &DiscreteHmm,
    b: &ExactBelief,
    action: usize,
    obs: usize,
) -> Result<(ExactBelief, f64)> {
    let n = model.n_states();
    if b.0.len() != n {
        return Err(Error::Shape(format!("belief over {} states, model has {n}", b.0.len())));
    }
    model.check_indices(0, action)?;
    if obs >= model.n_obs() {
        return Err(Error::Contract(format!("observation {obs} out of range 0..{}", model.n_obs())));
    }
    let mut next = vec![0.0; n];
    for (s, &bs) in b.0.iter().enumerate() {
        if bs == 0.0 {
            continue;
        }
        for (ns, p) in model.transition_row(action, s).iter().enumerate() {
            next[ns] += p * bs;
        }
    }
    for (ns, v) in next.iter_mut().enumerate() {
        *v *= model.obs_prob(action, ns, obs);
    }
    let z: f64 = next.iter().sum();
    if z <= 0.0 {
        return Err(Error::ImpossibleEvidence { observation: obs });
    }
    for v in &mut next {
        *v /= z;
    }
    Ok((ExactBelief(next), z.ln()))
}

/// Normalised weight mass per bin. `bin` maps a particle to its bin index;
/// a particle outside `0..n_bins` is a contract error.
pub fn particle_belief_to_histogram<P>(
    particles: &[P],
    logw: &[f64],
    n_bins: usize,
    bin: impl Fn(&P) -> Option<usize>,
) -> Result<Vec<f64>> {
    if particles.len() != logw.len() {
        return Err(Error::Shape(format!(
            "{} particles but {} weights",
            particles.len(),
            logw.len()
        )));
    }
    let w = normalized_weights(logw)?;
    let mut hist = vec![0.0; n_bins];
    for (p, wk) in particles.iter().zip(w) {
        match bin(p) {
            Some(i) if i < n_bins => hist[i] += wk,
            _ => return Err(Error::Contract("binning does not cover every particle".into())),
        }
    }
    Ok(hist)
}

/// `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(u_obs0: [f64; 2]) -> DiscreteHmm {
        DiscreteHmm::uncontrolled(
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![
                vec![u_obs0[0], 1.0 - u_obs0[0]],
                vec![u_obs0[1], 1.0 - u_obs0[1]],
            ],
            vec![0.5, 0.5],
            1,
        )
        .unwrap()
    }

    #[test]
    fn hand_evaluated_update() {
        let m = two_state([0.8, 0.3]);
        let (b, log_z) = exact_belief_update(&m, &ExactBelief::initial(&m), 0, 0).unwrap();
        let un = [0.55 * 0.8, 0.45 * 0.3];
        let z = un[0] + un[1];
        assert!((b.probs()[0] - un[0] / z).abs() < 1e-15);
        assert!((b.probs()[0] - 0.7652).abs() < 1e-4);
        assert!((b.probs()[1] - 0.2348).abs() < 1e-4);
        assert!((log_z - z.ln()).abs() < 1e-15);
    }

    #[test]
    fn uniform_likelihood_is_prediction() {
        let m = two_state([0.5, 0.5]);
        let b0 = ExactBelief::new(vec![0.3, 0.7]).unwrap();
        let (b, _) = exact_belief_update(&m, &b0, 0, 1).unwrap();
        assert!((b.probs()[0] - (0.3 * 0.9 + 0.7 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_emission_gives_one_hot() {
        let m = two_state([1.0, 0.0]);
        let (b, _) = exact_belief_update(&m, &ExactBelief::initial(&m), 0, 1).unwrap();
        assert_eq!(b.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn impossible_observation() {
        let m = two_state([1.0, 1.0]);
        let err = exact_belief_update(&m, &ExactBelief::initial(&m), 0, 1).unwrap_err();
        assert!(matches!(err, Error::ImpossibleEvidence { observation: 1 }));
    }

    #[test]
    fn histograms() {
        assert_eq!(
            particle_belief_to_histogram(&[2usize], &[-4.0], 3, |&s| Some(s)).unwrap(),
            vec![0.0, 0.0, 1.0]
        );
        let h = particle_belief_to_histogram(&[0usize, 1, 0, 1], &[0.0; 4], 2, |&s| Some(s)).unwrap();
        assert_eq!(h, vec![0.5, 0.5]);
        assert!(particle_belief_to_histogram(&[5usize], &[0.0], 2, |&s| Some(s)).is_err());
    }

    #[test]
    fn histogram_shift_invariant() {
        let parts = [0usize, 1, 1, 2];
        let logw = [0.2, -1.0, 0.5, 0.0];
        let shifted: Vec<f64> = logw.iter().map(|w| w + 7.5).collect();
        let a = particle_belief_to_histogram(&parts, &logw, 3, |&s| Some(s)).unwrap();
        let b = particle_belief_to_histogram(&parts, &shifted, 3, |&s| Some(s)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
