mod common;

use beliefrl::envs::{hmm_step, DiscreteHmm, LinearGaussianSsm};
use beliefrl::inference::{
    exact_belief_update, kalman_log_marginal, particle_belief_to_histogram, resample_ancestors, ExactBelief,
};
use beliefrl::rng::{stream, Domain};
use nalgebra::DVector;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn column(xs: &[f64]) -> Vec<DVector<f64>> {
    xs.iter().map(|&x| DVector::from_element(1, x)).collect()
}

#[test]
fn kalman_matches_grid_quadrature() {
    let cases = [
        (0.9, 1.0, 0.3, 0.5, 0.0, 1.0, [0.4, -0.3, 1.1]),
        (1.2, 0.7, 0.5, 0.2, 0.5, 2.0, [1.0, 1.5, 0.2]),
        (-0.5, 2.0, 1.0, 1.0, -1.0, 0.5, [-2.0, 0.3, 0.9]),
    ];
    for (a, c, q, r, m0, p0, obs) in cases {
        let m = LinearGaussianSsm::scalar(a, c, q, r, m0, p0).unwrap();
        let exact = kalman_log_marginal(&m, &column(&obs), &column(&[0.0; 3])).unwrap();
        let grid = common::grid_log_marginal(a, c, q, r, m0, p0, &obs, -12.0, 12.0, 1201);
        assert!((exact - grid).abs() < 1e-4, "{exact} vs {grid}");
    }
}

#[test]
fn kalman_matches_independent_scalar_filter() {
    let mut rng = stream(0, Domain::Env, 0);
    for _ in 0..50 {
        let a = rng.random_range(-1.5..1.5);
        let c = rng.random_range(0.2..2.0);
        let q = rng.random_range(0.05..2.0);
        let r = rng.random_range(0.05..2.0);
        let m0 = rng.random_range(-2.0..2.0);
        let p0 = rng.random_range(0.1..3.0);
        let obs: Vec<f64> = (0..12).map(|_| rng.random_range(-4.0..4.0)).collect();
        let m = LinearGaussianSsm::scalar(a, c, q, r, m0, p0).unwrap();
        let lib = kalman_log_marginal(&m, &column(&obs), &column(&vec![0.0; obs.len()])).unwrap();
        let oracle = common::scalar_kalman(a, c, q, r, m0, p0, &obs);
        assert!((lib - oracle).abs() < 1e-9 * oracle.abs().max(1.0), "{lib} vs {oracle}");
    }
}

fn random_stochastic_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|x| x / s).collect();
    // Put the rounding residue on the largest entry so the row sums to 1.
    let residue = 1.0 - row.iter().sum::<f64>();
    let big = (0..n).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
    row[big] += residue;
    row
}

#[test]
fn chained_normalisers_match_path_enumeration() {
    let mut rng = stream(1, Domain::Env, 0);
    for case in 0..20 {
        let n = 2 + case % 3;
        let n_obs = 2 + case % 2;
        let n_actions = 1 + case % 2;
        let t_max = 4 + case % 5;
        let trans: Vec<Vec<Vec<f64>>> = (0..n_actions)
            .map(|_| (0..n).map(|_| random_stochastic_row(&mut rng, n)).collect())
            .collect();
        let emit: Vec<Vec<Vec<f64>>> = (0..n_actions)
            .map(|_| (0..n).map(|_| random_stochastic_row(&mut rng, n_obs)).collect())
            .collect();
        let init = random_stochastic_row(&mut rng, n);
        let model = DiscreteHmm::new(trans.clone(), emit.clone(), init.clone()).unwrap();

        let mut s = model.sample_initial(&mut rng);
        let mut actions = Vec::new();
        let mut obs = Vec::new();
        for _ in 0..t_max {
            let a = rng.random_range(0..n_actions);
            let (next, o) = hmm_step(&model, s, a, &mut rng).unwrap();
            s = next;
            actions.push(a);
            obs.push(o);
        }

        let mut b = ExactBelief::initial(&model);
        let mut log_lik = 0.0;
        for (&a, &o) in actions.iter().zip(&obs) {
            let (next, log_z) = exact_belief_update(&model, &b, a, o).unwrap();
            let p = next.probs();
            assert!(p.iter().all(|&x| x >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            log_lik += log_z;
            b = next;
        }
        let oracle = common::enumerate_hmm_log_likelihood(&init, &trans, &emit, &actions, &obs);
        assert!((log_lik - oracle).abs() < 1e-10, "{log_lik} vs {oracle}");
    }
}

#[test]
fn uniform_resampling_passes_chi_square() {
    let logw = [0.0; 4];
    let mut rng = stream(2, Domain::Agent, 0);
    let mut counts = [0usize; 4];
    for _ in 0..25_000 {
        for u in resample_ancestors(&logw, &mut rng).unwrap() {
            counts[u] += 1;
        }
    }
    let stat = common::pearson(&counts, &[0.25; 4]);
    let critical = ChiSquared::new(3.0).unwrap().inverse_cdf(0.99);
    assert!(stat <= critical, "{stat} > {critical}");
}

#[test]
fn histogram_examples() {
    let one = particle_belief_to_histogram(&[1usize], &[-3.0], 3, |&p| Some(p)).unwrap();
    assert_eq!(one, vec![0.0, 1.0, 0.0]);
    let two = particle_belief_to_histogram(&[0usize, 1, 0, 1], &[0.0; 4], 2, |&p| Some(p)).unwrap();
    assert_eq!(two, vec![0.5, 0.5]);
}
