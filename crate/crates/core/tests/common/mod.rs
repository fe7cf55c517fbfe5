//! Reference computations written independently of the library, used as
//! oracles by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Scalar Kalman filter log-likelihood for `s' = a s + N(0, q)`,
/// `o = c s' + N(0, r)`, `s_0 ~ N(m0, p0)`.
pub fn scalar_kalman(a: f64, c: f64, q: f64, r: f64, m0: f64, p0: f64, obs: &[f64]) -> f64 {
    let (mut m, mut p) = (m0, p0);
    let mut ll = 0.0;
    for &o in obs {
        let mp = a * m;
        let pp = a * a * p + q;
        let s = c * c * pp + r;
        let e = o - c * mp;
        ll += -0.5 * ((2.0 * PI * s).ln() + e * e / s);
        let k = pp * c / s;
        m = mp + k * e;
        p = (1.0 - k * c) * pp;
    }
    ll
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// `log ∫ p(s_0) Π_t p(s_t|s_{t−1}) p(o_t|s_t) ds` by the trapezoidal rule,
/// propagating the unnormalised filtering density over a uniform grid.
pub fn grid_log_marginal(a: f64, c: f64, q: f64, r: f64, m0: f64, p0: f64, obs: &[f64], lo: f64, hi: f64, n: usize) -> f64 {
    let dx = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * dx).collect();
    let trap = |f: &[f64]| -> f64 { dx * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1])) };
    let mut dens: Vec<f64> = xs.iter().map(|&x| normal_pdf(x, m0, p0)).collect();
    let mut log_scale = 0.0;
    for &o in obs {
        let pred: Vec<f64> = xs
            .iter()
            .map(|&x1| {
                let f: Vec<f64> = xs.iter().zip(&dens).map(|(&x0, &d)| d * normal_pdf(x1, a * x0, q)).collect();
                trap(&f)
            })
            .collect();
        let post: Vec<f64> = xs.iter().zip(&pred).map(|(&x, &p)| p * normal_pdf(o, c * x, r)).collect();
        let z = trap(&post);
        log_scale += z.ln();
        dens = post.iter().map(|p| p / z).collect();
    }
    log_scale
}

/// `log p(o_{1:T} | a_{0:T−1})` by summing over every state path.
pub fn enumerate_hmm_log_likelihood(
    init: &[f64],
    trans: &[Vec<Vec<f64>>],
    emit: &[Vec<Vec<f64>>],
    actions: &[usize],
    obs: &[usize],
) -> f64 {
    let n = init.len();
    let t_max = obs.len();
    let mut total = 0.0;
    let paths = n.pow(t_max as u32 + 1);
    for code in 0..paths {
        let mut path = Vec::with_capacity(t_max + 1);
        let mut c = code;
        for _ in 0..=t_max {
            path.push(c % n);
            c /= n;
        }
        let mut p = init[path[0]];
        for t in 0..t_max {
            let a = actions[t];
            p *= trans[a][path[t]][path[t + 1]] * emit[a][path[t + 1]][obs[t]];
        }
        total += p;
    }
    total.ln()
}

/// `Σ_{j≥t} γ^{j−t} r_j` up to and including the first terminal step,
/// plus the discounted bootstrap value when no terminal step occurs.
pub fn discounted_return(rewards: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> f64 {
    let mut total = 0.0;
    for (j, (&r, &d)) in rewards.iter().zip(dones).enumerate() {
        total += gamma.powi(j as i32) * r;
        if d {
            return total;
        }
    }
    total + gamma.powi(rewards.len() as i32) * bootstrap
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pearson statistic of observed counts against expected probabilities.
pub fn pearson(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}
