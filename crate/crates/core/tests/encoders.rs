mod common;

use beliefrl::diffmath::{ParamStore, Tensor, Var};
use beliefrl::encoders::{
    particle_step, Bootstrap, DvrlDims, DvrlModel, LgssParticleModel, ParticleBelief, ParticleModel, RngNoise,
    RnnEncoder, TiedProposal,
};
use beliefrl::envs::{lgss_step, standard_normals, LinearGaussianSsm};
use beliefrl::inference::{ess, iwae_elbo, normalized_weights};
use beliefrl::rng::{stream, Domain};
use nalgebra::DVector;

const DIMS: DvrlDims = DvrlDims { obs: 2, action: 2, h: 12, z: 5 };

fn model(seed: u64) -> (ParamStore, DvrlModel) {
    let mut store = ParamStore::new();
    let m = DvrlModel::new(&mut store, DIMS, &mut stream(seed, Domain::Init, 0));
    (store, m)
}

fn gaussian(rng: &mut dyn rand::RngCore, rows: usize, cols: usize) -> Var {
    Var::leaf(Tensor::new(rows, cols, standard_normals(rng, rows * cols)).unwrap())
}

fn initial(store: &ParamStore, m: &DvrlModel, batch: usize, k: usize) -> ParticleBelief {
    let mut rng = stream(0, Domain::Agent, 0);
    m.initial(&store.bind(), batch, k, &mut RngNoise::new(&mut rng)).unwrap()
}

#[test]
fn initial_belief_is_uniform_and_repeatable() {
    let (store, m) = model(1);
    let b = initial(&store, &m, 2, 3);
    for row in 0..2 {
        for &w in b.logw.value().row_slice(row) {
            assert_eq!(w, -(3f64).ln());
        }
    }
    assert_eq!(b.ess().unwrap(), vec![3.0, 3.0]);
    let again = initial(&store, &m, 2, 3);
    assert_eq!(b.h.value(), again.h.value());
    assert_eq!(b.z.value(), again.z.value());
    assert_eq!(b.summary.unwrap().value(), again.summary.unwrap().value());
}

#[test]
fn single_particle_step_matches_importance_weighted_step() {
    let (store, m) = model(2);
    let bind = store.bind();
    let mut data = stream(2, Domain::Env, 0);
    let obs = gaussian(&mut data, 1, 2);
    let a = gaussian(&mut data, 1, 2);
    let b0 = initial(&store, &m, 1, 1);
    let run = |resample: bool| {
        let mut rng = stream(3, Domain::Agent, 0);
        particle_step(&m, &bind, &b0, &a, &obs, &mut RngNoise::new(&mut rng), resample).unwrap()
    };
    let smc = run(true);
    let iw = run(false);
    let logw = smc.belief.logw.value().item();
    assert_eq!(smc.elbo_term.item(), logw);
    assert_eq!(iwae_elbo(&[vec![iw.belief.logw.value().item()]]).unwrap(), smc.elbo_term.item());
}

#[test]
fn tied_proposal_weights_reduce_to_emission() {
    let (store, m) = model(4);
    let bind = store.bind();
    let mut data = stream(4, Domain::Env, 0);
    let mut worst: f64 = 0.0;
    let mut tied_b = initial(&store, &m, 3, 6);
    let mut boot_b = tied_b.clone();
    for t in 0..8 {
        let obs = gaussian(&mut data, 3, 2);
        let a = gaussian(&mut data, 3, 2);
        let mut r1 = stream(t, Domain::Agent, 0);
        let mut r2 = stream(t, Domain::Agent, 0);
        let tied = particle_step(&TiedProposal(&m), &bind, &tied_b, &a, &obs, &mut RngNoise::new(&mut r1), true).unwrap();
        let boot = particle_step(&Bootstrap(&m), &bind, &boot_b, &a, &obs, &mut RngNoise::new(&mut r2), true).unwrap();
        for (x, y) in tied.belief.logw.value().data().iter().zip(boot.belief.logw.value().data()) {
            worst = worst.max((x - y).abs());
        }
        tied_b = tied.belief;
        boot_b = boot.belief;
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn step_invariants_hold() {
    let (store, m) = model(5);
    let bind = store.bind();
    let (batch, k) = (3, 7);
    let mut b = initial(&store, &m, batch, k);
    let mut data = stream(5, Domain::Env, 0);
    let mut rng = stream(5, Domain::Agent, 0);
    for _ in 0..15 {
        let obs = gaussian(&mut data, batch, 2);
        let a = gaussian(&mut data, batch, 2);
        b = particle_step(&m, &bind, &b, &a, &obs, &mut RngNoise::new(&mut rng), true)
            .unwrap()
            .belief;
        assert_eq!(b.h.shape(), (batch * k, DIMS.h));
        assert_eq!(b.z.shape(), (batch * k, DIMS.z));
        assert_eq!(b.logw.shape(), (batch, k));
        assert!(b.logw.value().all_finite());
        assert!(b.h.value().data().iter().all(|h| h.abs() < 1.0));
        assert_eq!(b.summary.as_ref().unwrap().shape(), (batch, DIMS.h));
    }
}

#[test]
fn weight_shift_changes_only_the_bound() {
    let logw = [0.3, -1.2, 2.0, 0.0];
    let c = -7.5;
    let shifted: Vec<f64> = logw.iter().map(|w| w + c).collect();
    let a = beliefrl::inference::elbo_term_value(&logw).unwrap();
    let b = beliefrl::inference::elbo_term_value(&shifted).unwrap();
    assert!((b - a - c).abs() < 1e-12);
    let (p, q) = (normalized_weights(&logw).unwrap(), normalized_weights(&shifted).unwrap());
    for (x, y) in p.iter().zip(&q) {
        assert!((x - y).abs() < 1e-15);
    }
    assert!((ess(&logw).unwrap() - ess(&shifted).unwrap()).abs() < 1e-12);
}

fn set_group_to_zero(store: &mut ParamStore, prefix: &str) {
    let names: Vec<String> = store
        .entries()
        .iter()
        .filter(|e| e.name.starts_with(prefix))
        .map(|e| e.name.clone())
        .collect();
    let ids: Vec<_> = names.iter().map(|n| store.find(n).unwrap()).collect();
    assert!(!ids.is_empty());
    for id in ids {
        let t = store.get_mut(id);
        *t = Tensor::zeros(t.rows(), t.cols());
    }
}

#[test]
fn zero_summary_gru_gives_zero() {
    let (mut store, m) = model(6);
    set_group_to_zero(&mut store, "dvrl.summary.");
    let mut data = stream(6, Domain::Env, 0);
    let (b, k) = (2, 5);
    let h = gaussian(&mut data, b * k, DIMS.h).tanh();
    let xz = gaussian(&mut data, b * k, DIMS.h);
    let logw = gaussian(&mut data, b, k);
    let s = m.summarize_particles(&store.bind(), &h, &xz, &logw).unwrap();
    assert!(s.value().data().iter().all(|&x| x == 0.0));
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn single_particle_summary_is_one_gru_step() {
    let (store, m) = model(7);
    let mut data = stream(7, Domain::Env, 0);
    let h = gaussian(&mut data, 1, DIMS.h).tanh();
    let xz = gaussian(&mut data, 1, DIMS.h);
    let logw = Var::leaf(Tensor::scalar(-0.7));
    let s = m.summarize_particles(&store.bind(), &h, &xz, &logw).unwrap();

    let p = |name: &str| store.get(store.find(&format!("dvrl.summary.{name}")).unwrap()).clone();
    let (w_x, b_x, b_h) = (p("w_x"), p("b_x"), p("b_h"));
    let d = DIMS.h;
    let mut x = vec![1.0];
    x.extend_from_slice(xz.value().data());
    x.extend_from_slice(h.value().data());
    // From a zero state the recurrent products vanish, leaving the biases.
    let gx: Vec<f64> = (0..3 * d)
        .map(|j| b_x.data()[j] + x.iter().enumerate().map(|(i, xi)| xi * w_x.get(i, j)).sum::<f64>())
        .collect();
    for c in 0..d {
        let r = sigmoid(gx[c] + b_h.data()[c]);
        let u = sigmoid(gx[d + c] + b_h.data()[d + c]);
        let n = (gx[2 * d + c] + r * b_h.data()[2 * d + c]).tanh();
        let expected = (1.0 - u) * n;
        assert!((s.value().data()[c] - expected).abs() < 1e-12);
    }
    let again = m.summarize_particles(&store.bind(), &h, &xz, &logw).unwrap();
    assert_eq!(s.value(), again.value());
}

#[test]
fn zero_weight_rnn_halves_state() {
    let mut store = ParamStore::new();
    let enc = RnnEncoder::new(&mut store, 2, 2, 6, false, &mut stream(0, Domain::Init, 0));
    set_group_to_zero(&mut store, "rnn.gru.");
    let mut data = stream(8, Domain::Env, 0);
    let h = gaussian(&mut data, 3, 6);
    let (next, recon) = enc
        .step(&store.bind(), &h, &gaussian(&mut data, 3, 2), &gaussian(&mut data, 3, 2))
        .unwrap();
    assert!(recon.is_none());
    for (a, b) in next.value().data().iter().zip(h.value().data()) {
        assert_eq!(*a, 0.5 * b);
    }
}

#[test]
fn rnn_step_is_deterministic_and_recon_is_optional() {
    let mut store = ParamStore::new();
    let enc = RnnEncoder::new(&mut store, 2, 2, 6, true, &mut stream(1, Domain::Init, 0));
    let mut data = stream(9, Domain::Env, 0);
    let (h, a, o) = (gaussian(&mut data, 2, 6), gaussian(&mut data, 2, 2), gaussian(&mut data, 2, 2));
    let (n1, r1) = enc.step(&store.bind(), &h, &a, &o).unwrap();
    let (n2, r2) = enc.step(&store.bind(), &h, &a, &o).unwrap();
    assert_eq!(n1.value(), n2.value());
    let (r1, r2) = (r1.unwrap(), r2.unwrap());
    assert_eq!(r1.value(), r2.value());
    assert_eq!(r1.shape(), (2, 1));
}

fn lgss_observations(m: &LinearGaussianSsm, t: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Domain::Env, 0);
    let mut s = m.sample_initial(&mut rng);
    let a = DVector::zeros(1);
    (0..t)
        .map(|_| {
            let (n, o) = lgss_step(m, &s, &a, &mut rng).unwrap();
            s = n;
            o[0]
        })
        .collect()
}

fn lgss_filter_bound(m: &LinearGaussianSsm, obs: &[f64], k: usize, seed: u64) -> (f64, Vec<f64>) {
    let pm = LgssParticleModel::new(m).unwrap();
    let bind = ParamStore::new().bind();
    let mut rng = stream(seed, Domain::Agent, 0);
    let mut noise = RngNoise::new(&mut rng);
    let mut b = pm.initial(&bind, 1, k, &mut noise).unwrap();
    let a = Var::leaf(Tensor::zeros(1, 1));
    let mut bound = 0.0;
    let mut variances = Vec::new();
    for &o in obs {
        let s = particle_step(&pm, &bind, &b, &a, &Var::leaf(Tensor::scalar(o)), &mut noise, true).unwrap();
        bound += s.elbo_term.item();
        b = s.belief;
        let w = normalized_weights(b.logw.value().data()).unwrap();
        let z = b.z.value().data();
        let mean: f64 = w.iter().zip(z).map(|(w, z)| w * z).sum();
        variances.push(w.iter().zip(z).map(|(w, z)| w * (z - mean).powi(2)).sum());
    }
    (bound, variances)
}

#[test]
fn batched_filter_on_linear_gaussian_model_tracks_kalman() {
    let (a, c, q, r, m0, p0) = (0.9, 1.0, 0.3, 0.5, 0.0, 1.0);
    let m = LinearGaussianSsm::scalar(a, c, q, r, m0, p0).unwrap();
    let obs = lgss_observations(&m, 25, 0);
    let exact = common::scalar_kalman(a, c, q, r, m0, p0, &obs);
    let runs: Vec<f64> = (0..20).map(|s| lgss_filter_bound(&m, &obs, 1000, s).0).collect();
    let mean = runs.iter().sum::<f64>() / 20.0;
    assert!((mean - exact).abs() <= 0.02 * exact.abs(), "{mean} vs {exact}");
}

#[test]
fn posterior_spread_shrinks_on_a_nearly_deterministic_chain() {
    // Static state, tiny process noise, precise observations.
    let m = LinearGaussianSsm::scalar(1.0, 1.0, 1e-6, 0.05, 0.0, 1.0).unwrap();
    let steps = 10;
    let mut mean_var = vec![0.0; steps];
    for seed in 0..20 {
        let obs = lgss_observations(&m, steps, 100 + seed);
        let (_, v) = lgss_filter_bound(&m, &obs, 500, seed);
        for (acc, x) in mean_var.iter_mut().zip(v) {
            *acc += x / 20.0;
        }
    }
    for t in 1..steps {
        assert!(mean_var[t] <= mean_var[t - 1], "{mean_var:?}");
    }
    assert!(mean_var[steps - 1] < 0.5 * mean_var[0]);
}
