//! Self-contained oracle and property suites behind `beliefrl verify`.
//!
//! Every suite uses fixed internal seeds and touches no files, so a correct
//! build passes deterministically.

use nalgebra::DVector;
use rand::{Rng, RngCore};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::diffmath::{
    gaussian_entropy, gaussian_logpdf, grad_check, reparam_sample, Binding, Categorical, DiagGaussian,
    GruCell, Linear, ParamGroup, ParamStore, Tensor, Var,
};
use crate::encoders::{particle_step, DvrlDims, DvrlModel, Encoder, Latent, NoiseTape, RngNoise};
use crate::envs::{hmm_step, lgss_step, standard_normals, DiscreteHmm, LinearGaussianSsm};
use crate::error::Result;
use crate::inference::{
    elbo_term, elbo_term_value, exact_belief_update, hmm_filter_histograms, iwae_elbo, kalman_log_marginal,
    resample_ancestors, run_smc, total_variation, ExactBelief, LgssBootstrap,
};
use crate::rl::{compute_targets, elbo_loss, RolloutSegment};
use crate::rng::{stream, Domain};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Suite = fn() -> Result<SuiteResult>;

/// Every suite, in the order `run_all` executes them.
pub const SUITES: &[(&str, Suite)] = &[
    ("kalman", kalman_bound),
    ("tightening", monotone_tightening),
    ("hmm", hmm_belief),
    ("elbo-additivity", elbo_additivity),
    ("iwae-k1", iwae_coincidence),
    ("gradients", gradients),
    ("resampling", resampling),
    ("targets", nstep_targets),
];

/// Runs every suite; an error inside a suite counts as a failure.
pub fn run_all() -> Vec<SuiteResult> {
    SUITES
        .iter()
        .map(|(name, suite)| {
            suite().unwrap_or_else(|e| SuiteResult {
                name,
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}

fn outcome(name: &'static str, passed: bool, detail: String) -> Result<SuiteResult> {
    Ok(SuiteResult { name, passed, detail })
}

/// The scalar oracle model `A=0.9, C=1, Q=0.3, R=0.5` with prior `N(0, 1)`.
pub fn oracle_lgss() -> LinearGaussianSsm {
    LinearGaussianSsm::scalar(0.9, 1.0, 0.3, 0.5, 0.0, 1.0).expect("valid oracle model")
}

/// Observations of one simulated run and the matching zero actions.
pub fn simulate_lgss(
    model: &LinearGaussianSsm,
    t: usize,
    rng: &mut dyn RngCore,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let actions = vec![DVector::zeros(model.action_dim()); t];
    let mut s = model.sample_initial(rng);
    let mut obs = Vec::with_capacity(t);
    for a in &actions {
        let (next, o) = lgss_step(model, &s, a, rng)?;
        s = next;
        obs.push(o);
    }
    Ok((obs, actions))
}

fn bootstrap_elbo(
    model: &LinearGaussianSsm,
    obs: &[DVector<f64>],
    actions: &[DVector<f64>],
    k: usize,
    seed: u64,
) -> Result<f64> {
    let f = LgssBootstrap::new(model, obs, actions)?;
    let mut rng = stream(seed, Domain::Agent, k as u64);
    Ok(run_smc(&f, k, true, &mut rng, |_, _, _| Ok(()))?.elbo())
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn kalman_bound() -> Result<SuiteResult> {
    let model = oracle_lgss();
    let (obs, actions) = simulate_lgss(&model, 25, &mut stream(0, Domain::Env, 0))?;
    let exact = kalman_log_marginal(&model, &obs, &actions)?;
    let mut passed = true;
    let mut detail = format!("exact {exact:.4}");
    for k in [1, 10, 100, 1000] {
        let runs = (0..50)
            .map(|s| bootstrap_elbo(&model, &obs, &actions, k, s))
            .collect::<Result<Vec<_>>>()?;
        let (mean, se) = mean_se(&runs);
        let ok = if k == 1000 {
            (mean - exact).abs() <= 0.02 * exact.abs()
        } else {
            mean <= exact + 3.0 * se
        };
        passed &= ok;
        detail += &format!("; K={k} {mean:.4}±{se:.4}");
    }
    outcome("kalman", passed, detail)
}

fn monotone_tightening() -> Result<SuiteResult> {
    let model = oracle_lgss();
    let mut sums = [0.0; 3];
    for seed in 0..50 {
        let (obs, actions) = simulate_lgss(&model, 25, &mut stream(seed, Domain::Env, 1))?;
        for (i, k) in [1, 4, 100].into_iter().enumerate() {
            sums[i] += bootstrap_elbo(&model, &obs, &actions, k, 1000 + seed)?;
        }
    }
    let m = sums.map(|s| s / 50.0);
    outcome(
        "tightening",
        m[2] >= m[1] && m[1] >= m[0],
        format!("K=1 {:.4}, K=4 {:.4}, K=100 {:.4}", m[0], m[1], m[2]),
    )
}

/// A 3-state, 2-action, 3-symbol model used by the belief checks.
pub fn oracle_hmm() -> DiscreteHmm {
    DiscreteHmm::new(
        vec![
            vec![vec![0.8, 0.15, 0.05], vec![0.1, 0.7, 0.2], vec![0.25, 0.25, 0.5]],
            vec![vec![0.3, 0.6, 0.1], vec![0.05, 0.15, 0.8], vec![0.6, 0.2, 0.2]],
        ],
        vec![
            vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.6, 0.2], vec![0.1, 0.3, 0.6]],
            vec![vec![0.5, 0.4, 0.1], vec![0.1, 0.8, 0.1], vec![0.3, 0.1, 0.6]],
        ],
        vec![0.5, 0.3, 0.2],
    )
    .expect("valid oracle model")
}

fn hmm_belief() -> Result<SuiteResult> {
    let model = oracle_hmm();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = stream(seed, Domain::Env, 2);
        let mut s = model.sample_initial(&mut rng);
        let mut actions = Vec::new();
        let mut obs = Vec::new();
        for _ in 0..20 {
            let a = rng.random_range(0..model.n_actions());
            let (next, o) = hmm_step(&model, s, a, &mut rng)?;
            s = next;
            actions.push(a);
            obs.push(o);
        }
        let hists = hmm_filter_histograms(&model, &actions, &obs, 10_000, &mut stream(seed, Domain::Agent, 2))?;
        let mut b = ExactBelief::initial(&model);
        for ((h, &a), &o) in hists.iter().zip(&actions).zip(&obs) {
            b = exact_belief_update(&model, &b, a, o)?.0;
            worst = worst.max(total_variation(h, b.probs()));
        }
    }
    outcome("hmm", worst < 0.05, format!("max TV {worst:.4}"))
}

fn small_dvrl(seed: u64, dims: DvrlDims) -> (ParamStore, DvrlModel) {
    let mut store = ParamStore::new();
    let mut rng = stream(seed, Domain::Init, 0);
    let model = DvrlModel::new(&mut store, dims, &mut rng);
    // Move the zero-initialised start state off the origin.
    for t in store.values_mut() {
        let noise = standard_normals(&mut rng, t.len());
        for (x, e) in t.data_mut().iter_mut().zip(noise) {
            *x += 0.1 * e;
        }
    }
    (store, model)
}

fn random_inputs(rng: &mut dyn RngCore, steps: usize, batch: usize, dim: usize) -> Vec<Var> {
    (0..steps)
        .map(|_| Var::leaf(Tensor::new(batch, dim, standard_normals(rng, batch * dim)).expect("shape")))
        .collect()
}

fn elbo_additivity() -> Result<SuiteResult> {
    let dims = DvrlDims { obs: 2, action: 2, h: 16, z: 8 };
    let (store, model) = small_dvrl(7, dims);
    let encoder = Encoder::Dvrl { model, particles: 8 };
    let (t_max, n_s, n_e) = (20, 5, 3);
    let mut data_rng = stream(7, Domain::Env, 0);
    let obs = random_inputs(&mut data_rng, t_max, n_e, dims.obs);
    let acts = random_inputs(&mut data_rng, t_max, n_e, dims.action);

    // One pass over the whole trajectory, summing the bound from raw weights.
    let mut rng = stream(7, Domain::Agent, 0);
    let mut noise = RngNoise::new(&mut rng);
    let bind = store.bind();
    let mut latent = encoder.initial(&bind, n_e, &mut noise)?;
    let mut whole = 0.0;
    for t in 0..t_max {
        latent = encoder.step(&bind, &latent, &acts[t], &obs[t], &mut noise)?.latent;
        if let Latent::Dvrl(b) = &latent {
            for row in 0..n_e {
                whole += elbo_term_value(b.logw.value().row_slice(row))?;
            }
        }
    }

    // Segments of n_s steps, each with a fresh binding and a cut latent.
    let mut rng = stream(7, Domain::Agent, 0);
    let mut noise = RngNoise::new(&mut rng);
    let mut latent = encoder.initial(&store.bind(), n_e, &mut noise)?;
    let mut segmented = 0.0;
    for start in (0..t_max).step_by(n_s) {
        let bind = store.bind();
        latent = latent.detach();
        let mut aux = Vec::with_capacity(n_s);
        for t in start..start + n_s {
            let step = encoder.step(&bind, &latent, &acts[t], &obs[t], &mut noise)?;
            latent = step.latent;
            aux.push(step.aux.expect("particle encoder yields bound terms"));
        }
        let seg = RolloutSegment {
            rewards: vec![],
            dones: vec![],
            log_probs: vec![],
            values: vec![],
            entropies: vec![],
            aux: Some(aux),
            bootstrap_values: vec![0.0; n_e],
        };
        segmented -= elbo_loss(&seg)?.item() * (n_s * n_e) as f64;
    }
    let diff = (whole - segmented).abs();
    outcome("elbo-additivity", diff <= 1e-9, format!("whole {whole:.6}, |Δ| {diff:.2e}"))
}

fn iwae_coincidence() -> Result<SuiteResult> {
    let dims = DvrlDims { obs: 2, action: 2, h: 8, z: 4 };
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (store, model) = small_dvrl(100 + seed, dims);
        let mut data_rng = stream(seed, Domain::Env, 3);
        let obs = random_inputs(&mut data_rng, 10, 1, dims.obs);
        let acts = random_inputs(&mut data_rng, 10, 1, dims.action);
        let bind = store.bind();
        let run = |resample: bool| -> Result<(f64, Vec<Vec<f64>>)> {
            let mut rng = stream(seed, Domain::Agent, 3);
            let mut noise = RngNoise::new(&mut rng);
            let mut belief = crate::encoders::ParticleModel::initial(&model, &bind, 1, 1, &mut noise)?;
            let mut bound = 0.0;
            let mut logw = Vec::new();
            for t in 0..obs.len() {
                let s = particle_step(&model, &bind, &belief, &acts[t], &obs[t], &mut noise, resample)?;
                bound += s.elbo_term.item();
                logw.push(s.belief.logw.value().data().to_vec());
                belief = s.belief;
            }
            Ok((bound, logw))
        };
        let (smc, _) = run(true)?;
        let (_, per_step) = run(false)?;
        worst = worst.max((smc - iwae_elbo(&per_step)?).abs());
    }
    outcome("iwae-k1", worst <= 1e-12, format!("max |SMC − IWAE| {worst:.2e} over 20 models"))
}

#[derive(Clone, Copy)]
enum Support {
    Real,
    Positive,
    AwayFromZero,
}

fn draw(rng: &mut dyn RngCore, rows: usize, cols: usize, support: Support) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| match support {
            Support::Real => standard_normals(rng, 1)[0],
            Support::Positive => rng.random_range(0.5..2.0),
            Support::AwayFromZero => {
                let m: f64 = rng.random_range(0.2..1.5);
                if rng.random::<bool>() { m } else { -m }
            }
        })
        .collect();
    Tensor::new(rows, cols, data).expect("shape")
}

type OpFn = Box<dyn Fn(&[Var]) -> Result<Var>>;

struct OpCase {
    name: &'static str,
    inputs: Vec<(usize, usize, Support)>,
    f: OpFn,
}

fn case(name: &'static str, inputs: &[(usize, usize, Support)], f: impl Fn(&[Var]) -> Result<Var> + 'static) -> OpCase {
    OpCase {
        name,
        inputs: inputs.to_vec(),
        f: Box::new(f),
    }
}

fn op_cases() -> Vec<OpCase> {
    use Support::*;
    let m = (3, 4, Real);
    vec![
        case("add", &[m, m], |v| Ok(v[0].add(&v[1]))),
        case("sub", &[m, m], |v| Ok(v[0].sub(&v[1]))),
        case("mul", &[m, m], |v| Ok(v[0].mul(&v[1]))),
        case("div", &[m, (3, 4, Positive)], |v| Ok(v[0].div(&v[1]))),
        case("add_row", &[m, (1, 4, Real)], |v| Ok(v[0].add_row(&v[1]))),
        case("add_col", &[m, (3, 1, Real)], |v| Ok(v[0].add_col(&v[1]))),
        case("mul_col", &[m, (3, 1, Real)], |v| Ok(v[0].mul_col(&v[1]))),
        case("matmul", &[m, (4, 2, Real)], |v| Ok(v[0].matmul(&v[1]))),
        case("scale", &[m], |v| Ok(v[0].scale(-2.5))),
        case("neg", &[m], |v| Ok(v[0].neg())),
        case("add_scalar", &[m], |v| Ok(v[0].add_scalar(1.75))),
        case("relu", &[(3, 4, AwayFromZero)], |v| Ok(v[0].relu())),
        case("tanh", &[m], |v| Ok(v[0].tanh())),
        case("sigmoid", &[m], |v| Ok(v[0].sigmoid())),
        case("softplus", &[m], |v| Ok(v[0].softplus())),
        case("exp", &[m], |v| Ok(v[0].exp())),
        case("ln", &[(3, 4, Positive)], |v| Ok(v[0].ln())),
        case("square", &[m], |v| Ok(v[0].square())),
        case("sum", &[m], |v| Ok(v[0].sum())),
        case("mean", &[m], |v| Ok(v[0].mean())),
        case("sum_rows", &[m], |v| Ok(v[0].sum_rows())),
        case("logsumexp_rows", &[m], |v| Ok(v[0].logsumexp_rows())),
        case("concat_cols", &[m, (3, 2, Real)], |v| Ok(Var::concat_cols(&[v[0].clone(), v[1].clone()]))),
        case("concat_rows", &[m, (2, 4, Real)], |v| Ok(Var::concat_rows(&[v[0].clone(), v[1].clone()]))),
        case("slice_cols", &[m], |v| Ok(v[0].slice_cols(1, 2))),
        case("gather_rows", &[m], |v| Ok(v[0].gather_rows(&[2, 0, 2, 1, 2]))),
        case("repeat_rows", &[m], |v| Ok(v[0].repeat_rows(3))),
        case("reshape", &[m], |v| Ok(v[0].reshape(4, 3))),
        case("gaussian_logpdf", &[m, m, (3, 4, Positive)], |v| {
            gaussian_logpdf(&v[0], &DiagGaussian::new(v[1].clone(), v[2].clone())?)
        }),
        case("reparam_sample", &[m, (3, 4, Positive)], |v| {
            let noise = Tensor::from_rows(&[
                vec![0.3, -1.1, 0.7, 2.0],
                vec![-0.4, 0.9, -1.6, 0.2],
                vec![1.3, -0.05, 0.6, -0.8],
            ])?;
            reparam_sample(&DiagGaussian::new(v[0].clone(), v[1].clone())?, &noise)
        }),
        case("gaussian_entropy", &[m, (3, 4, Positive)], |v| {
            Ok(gaussian_entropy(&DiagGaussian::new(v[0].clone(), v[1].clone())?))
        }),
        case("categorical_log_prob", &[m], |v| Categorical::new(v[0].clone())?.log_prob(&[3, 0, 1])),
        case("categorical_entropy", &[m], |v| Ok(Categorical::new(v[0].clone())?.entropy())),
        case("elbo_term", &[m], |v| elbo_term(&v[0])),
    ]
}

/// Parameters of a small layer, drawn once, with the layer itself.
fn layer_case(seed: u64) -> (ParamStore, Linear, GruCell) {
    let mut store = ParamStore::new();
    let mut rng = stream(seed, Domain::Init, 9);
    let lin = Linear::new(&mut store, "lin", ParamGroup::Model, 3, 2, &mut rng);
    let gru = GruCell::new(&mut store, "gru", ParamGroup::Model, 3, 2, &mut rng);
    for t in store.values_mut() {
        let noise = standard_normals(&mut rng, t.len());
        for (x, e) in t.data_mut().iter_mut().zip(noise) {
            *x += 0.3 * e;
        }
    }
    (store, lin, gru)
}

/// Largest relative error over every op and layer, 20 seeds each.
pub fn op_gradient_errors() -> Result<Vec<(&'static str, f64)>> {
    let mut out = Vec::new();
    for c in op_cases() {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let mut rng = stream(seed, Domain::Init, 7);
            let xs: Vec<Tensor> = c.inputs.iter().map(|&(r, k, s)| draw(&mut rng, r, k, s)).collect();
            // Contract the output with fixed weights so every output entry counts.
            let probe = (c.f)(&xs.iter().cloned().map(Var::leaf).collect::<Vec<_>>())?;
            let w = Var::leaf(draw(&mut rng, probe.rows(), probe.cols(), Support::AwayFromZero));
            let f = |v: &[Var]| -> Result<Var> { Ok((c.f)(v)?.mul(&w).sum()) };
            worst = worst.max(grad_check(f, &xs, 1e-6)?);
        }
        out.push((c.name, worst));
    }
    for (name, use_gru) in [("linear", false), ("gru", true)] {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let (store, lin, gru) = layer_case(seed);
            let mut rng = stream(seed, Domain::Init, 8);
            let x = Var::leaf(draw(&mut rng, 4, 3, Support::Real));
            let h = Var::leaf(draw(&mut rng, 4, 2, Support::Real));
            let w = Var::leaf(draw(&mut rng, 4, 2, Support::AwayFromZero));
            let params: Vec<Tensor> = store.entries().iter().map(|e| e.value.clone()).collect();
            let f = |v: &[Var]| -> Result<Var> {
                let bind = Binding::from_vars(&store, v.to_vec())?;
                let y = if use_gru { gru.step(&bind, &h, &x)? } else { lin.forward(&bind, &x)? };
                Ok(y.mul(&w).sum())
            };
            worst = worst.max(grad_check(f, &params, 1e-6)?);
        }
        out.push((name, worst));
    }
    Ok(out)
}

/// Smallest denominator used when comparing directional derivatives, so a
/// tensor the bound does not depend on compares rounding noise against
/// this rather than against zero.
pub const DIRECTIONAL_FLOOR: f64 = 1e-6;

/// Checks the gradient of the bound term of one filter step (taken after a
/// warm-up step, with all noise replayed) along one random direction per
/// parameter tensor and one across all of them. Returns the worst error.
pub fn dvrl_elbo_gradient_error(seed: u64) -> Result<f64> {
    let dims = DvrlDims { obs: 2, action: 2, h: 6, z: 3 };
    let (batch, k) = (2, 4);
    let (store, model) = small_dvrl(200 + seed, dims);
    let mut rng = stream(seed, Domain::Env, 4);
    let obs = random_inputs(&mut rng, 2, batch, dims.obs);
    let acts = random_inputs(&mut rng, 2, batch, dims.action);

    let mut tape = NoiseTape::default();
    {
        let mut agent = stream(seed, Domain::Agent, 4);
        let mut noise = RngNoise::recording(&mut agent, &mut tape);
        let bind = store.bind();
        let b0 = crate::encoders::ParticleModel::initial(&model, &bind, batch, k, &mut noise)?;
        let s1 = particle_step(&model, &bind, &b0, &acts[0], &obs[0], &mut noise, true)?;
        particle_step(&model, &bind, &s1.belief, &acts[1], &obs[1], &mut noise, true)?;
    }
    let f = |params: &[Var]| -> Result<Var> {
        let bind = Binding::from_vars(&store, params.to_vec())?;
        let mut noise = tape.replay();
        let b0 = crate::encoders::ParticleModel::initial(&model, &bind, batch, k, &mut noise)?;
        let s1 = particle_step(&model, &bind, &b0, &acts[0], &obs[0], &mut noise, true)?;
        let s2 = particle_step(&model, &bind, &s1.belief, &acts[1], &obs[1], &mut noise, true)?;
        Ok(s2.elbo_term.sum())
    };
    let eval = |values: &[Tensor]| -> Result<f64> {
        Ok(f(&values.iter().cloned().map(Var::leaf).collect::<Vec<_>>())?.item())
    };

    let theta: Vec<Tensor> = store.entries().iter().map(|e| e.value.clone()).collect();
    let leaves: Vec<Var> = theta.iter().cloned().map(Var::leaf).collect();
    let grads = f(&leaves)?.backward();
    let mut dir_rng = stream(seed, Domain::Init, 5);
    let directions: Vec<Tensor> = theta
        .iter()
        .map(|t| Tensor::new(t.rows(), t.cols(), standard_normals(&mut dir_rng, t.len())).expect("shape"))
        .collect();

    let eps = 1e-6;
    let check = |mask: &dyn Fn(usize) -> bool| -> Result<f64> {
        let mut analytic = 0.0;
        let mut up = theta.clone();
        let mut down = theta.clone();
        for (i, d) in directions.iter().enumerate() {
            if !mask(i) {
                continue;
            }
            if let Some(g) = grads.get(&leaves[i]) {
                analytic += g.data().iter().zip(d.data()).map(|(a, b)| a * b).sum::<f64>();
            }
            for ((u, l), dv) in up[i].data_mut().iter_mut().zip(down[i].data_mut()).zip(d.data()) {
                *u += eps * dv;
                *l -= eps * dv;
            }
        }
        let fd = (eval(&up)? - eval(&down)?) / (2.0 * eps);
        Ok((analytic - fd).abs() / analytic.abs().max(fd.abs()).max(DIRECTIONAL_FLOOR))
    };
    let mut worst = check(&|_| true)?;
    for i in 0..theta.len() {
        worst = worst.max(check(&|j| j == i)?);
    }
    Ok(worst)
}

fn gradients() -> Result<SuiteResult> {
    let ops = op_gradient_errors()?;
    let mut worst_dvrl: f64 = 0.0;
    for seed in 0..20 {
        worst_dvrl = worst_dvrl.max(dvrl_elbo_gradient_error(seed)?);
    }
    let (worst_name, worst_op) = ops
        .iter()
        .copied()
        .fold(("", 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    outcome(
        "gradients",
        worst_op < 1e-4 && worst_dvrl < 1e-4,
        format!(
            "{} ops, worst {worst_name} {worst_op:.2e}; DVRL bound {worst_dvrl:.2e}",
            ops.len()
        ),
    )
}

/// Pearson statistic of `draws` ancestor draws against the normalised weights.
pub fn ancestor_chi_square(logw: &[f64], draws: usize, rng: &mut dyn RngCore) -> Result<f64> {
    let k = logw.len();
    let mut counts = vec![0usize; k];
    let mut n = 0;
    while n < draws {
        for u in resample_ancestors(logw, rng)?.into_iter().take(draws - n) {
            counts[u] += 1;
            n += 1;
        }
    }
    let w = crate::inference::normalized_weights(logw)?;
    Ok(counts
        .iter()
        .zip(&w)
        .map(|(&c, &p)| {
            let e = p * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum())
}

fn resampling() -> Result<SuiteResult> {
    let k = 10;
    let critical = ChiSquared::new((k - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.99);
    let mut passes = 0;
    for seed in 0..10 {
        let mut rng = stream(seed, Domain::Agent, 6);
        let logw = standard_normals(&mut rng, k);
        if ancestor_chi_square(&logw, 100_000, &mut rng)? <= critical {
            passes += 1;
        }
    }
    outcome(
        "resampling",
        passes >= 9,
        format!("{passes}/10 below χ²₉(0.99) = {critical:.3}"),
    )
}

fn nstep_targets() -> Result<SuiteResult> {
    let mut rng = stream(0, Domain::Agent, 8);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n_s = rng.random_range(1..=8);
        let n_e = rng.random_range(1..=4);
        // Small integers and a dyadic discount keep every sum exact.
        let gamma = rng.random_range(1..16) as f64 / 16.0;
        let rewards: Vec<Vec<f64>> = (0..n_s)
            .map(|_| (0..n_e).map(|_| rng.random_range(-5..=5) as f64).collect())
            .collect();
        let dones: Vec<Vec<bool>> = (0..n_s)
            .map(|_| (0..n_e).map(|_| rng.random_bool(0.25)).collect())
            .collect();
        let bootstrap: Vec<f64> = (0..n_e).map(|_| rng.random_range(-5..=5) as f64).collect();
        let got = compute_targets(&rewards, &dones, &bootstrap, gamma)?;
        for t in 0..n_s {
            for e in 0..n_e {
                if got[t][e] != enumerate_return(&rewards, &dones, &bootstrap, gamma, t, e) {
                    mismatches += 1;
                }
            }
        }
    }
    outcome("targets", mismatches == 0, format!("{mismatches} mismatches over 1000 instances"))
}

/// `Σ_{j≥t} γ^{j−t} r_j`, stopping after the first terminal step and
/// otherwise adding `γ^{n−t}` times the bootstrap value.
pub fn enumerate_return(
    rewards: &[Vec<f64>],
    dones: &[Vec<bool>],
    bootstrap: &[f64],
    gamma: f64,
    t: usize,
    e: usize,
) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    for j in t..rewards.len() {
        total += discount * rewards[j][e];
        if dones[j][e] {
            return total;
        }
        discount *= gamma;
    }
    total + discount * bootstrap[e]
}
