//! Linear-Gaussian state-space model:
//!
//! ```text
//! s_0 ~ N(m0, P0)
//! s_t = A s_{t−1} + B a_{t−1} + ε_t,   ε_t ~ N(0, Q)
//! o_t = C s_t + δ_t,                    δ_t ~ N(0, R)
//! ```

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::{standard_normals, Action, ActionSpace, Env, Transition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianSsm {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub m0: DVector<f64>,
    pub p0: DMatrix<f64>,
    q_factor: DMatrix<f64>,
    r_factor: DMatrix<f64>,
    p0_factor: DMatrix<f64>,
}

/// Lower-triangular `L` with `L Lᵀ = m`. Falls back to the elementwise
/// square root for diagonal matrices with zero entries, which Cholesky
/// rejects.
fn psd_factor(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("{name} must be square")));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                return Err(Error::Domain(format!("{name} is not symmetric")));
            }
        }
    }
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.l());
    }
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0));
    if diagonal && (0..n).all(|i| m[(i, i)] >= 0.0) {
        return Ok(DMatrix::from_fn(n, n, |i, j| if i == j { m[(i, i)].sqrt() } else { 0.0 }));
    }
    Err(Error::Domain(format!("{name} is not positive semi-definite")))
}

impl LinearGaussianSsm {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        m0: DVector<f64>,
        p0: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = c.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Shape("A must be square and non-empty".into()));
        }
        if b.nrows() != n {
            return Err(Error::Shape(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if m == 0 || c.ncols() != n {
            return Err(Error::Shape(format!("C must be m x {n} with m > 0")));
        }
        if q.shape() != (n, n) || p0.shape() != (n, n) || m0.len() != n {
            return Err(Error::Shape("Q, P0 and m0 must match the state dimension".into()));
        }
        if r.shape() != (m, m) {
            return Err(Error::Shape("R must match the observation dimension".into()));
        }
        let q_factor = psd_factor(&q, "Q")?;
        let r_factor = psd_factor(&r, "R")?;
        let p0_factor = psd_factor(&p0, "P0")?;
        Ok(Self {
            a,
            b,
            c,
            q,
            r,
            m0,
            p0,
            q_factor,
            r_factor,
            p0_factor,
        })
    }

    /// One-dimensional model without actions.
    pub fn scalar(a: f64, c: f64, q: f64, r: f64, m0: f64, p0: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, q),
            DMatrix::from_element(1, 1, r),
            DVector::from_element(1, m0),
            DMatrix::from_element(1, 1, p0),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn action_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn sample_initial(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let e = DVector::from_vec(standard_normals(rng, self.state_dim()));
        &self.m0 + &self.p0_factor * e
    }

    pub fn observe(&self, state: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        let d = DVector::from_vec(standard_normals(rng, self.obs_dim()));
        &self.c * state + &self.r_factor * d
    }

    /// Samples `s' = A s + B a + ε` without an observation.
    pub fn transition(
        &self,
        state: &DVector<f64>,
        action: &DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<DVector<f64>> {
        if state.len() != self.state_dim() {
            return Err(Error::Shape(format!(
                "state has {} entries, model has {}",
                state.len(),
                self.state_dim()
            )));
        }
        self.check_action(action)?;
        let e = DVector::from_vec(standard_normals(rng, self.state_dim()));
        Ok(&self.a * state + &self.b * action + &self.q_factor * e)
    }

    pub(crate) fn check_action(&self, action: &DVector<f64>) -> Result<()> {
        if action.len() != self.action_dim() {
            return Err(Error::Shape(format!(
                "action has {} entries, model takes {}",
                action.len(),
                self.action_dim()
            )));
        }
        Ok(())
    }
}

/// Samples `(s', o)` given `s` and `a`.
pub fn lgss_step(
    model: &LinearGaussianSsm,
    state: &DVector<f64>,
    action: &DVector<f64>,
    rng: &mut dyn RngCore,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let next = model.transition(state, action, rng)?;
    let obs = model.observe(&next, rng);
    Ok((next, obs))
}

/// The model as an environment with zero reward. The first observation of
/// an episode is `C s_0 + δ`.
#[derive(Debug, Clone)]
pub struct LgssEnv {
    pub model: LinearGaussianSsm,
    horizon: usize,
    state: DVector<f64>,
    t: usize,
}

impl LgssEnv {
    pub fn new(model: LinearGaussianSsm, horizon: usize) -> Self {
        let state = model.m0.clone();
        Self {
            model,
            horizon,
            state,
            t: 0,
        }
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }
}

impl Env for LgssEnv {
    fn obs_dim(&self) -> usize {
        self.model.obs_dim()
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous(self.model.action_dim())
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.state = self.model.sample_initial(rng);
        self.t = 0;
        self.model.observe(&self.state, rng).as_slice().to_vec()
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<Transition> {
        let a = match action {
            Action::Continuous(v) => DVector::from_column_slice(v),
            Action::Discrete(_) => {
                return Err(Error::Contract("linear-gaussian env takes continuous actions".into()))
            }
        };
        let (next, obs) = lgss_step(&self.model, &self.state, &a, rng)?;
        self.state = next;
        self.t += 1;
        Ok(Transition {
            obs: obs.as_slice().to_vec(),
            reward: 0.0,
            done: self.t >= self.horizon,
        })
    }

    fn state_vec(&self) -> Vec<f64> {
        let mut v = self.state.as_slice().to_vec();
        v.push(self.t as f64);
        v
    }

    fn set_state_vec(&mut self, state: &[f64]) -> Result<()> {
        let n = self.model.state_dim();
        if state.len() != n + 1 {
            return Err(Error::Contract(format!("bad lgss state {state:?}")));
        }
        self.state = DVector::from_column_slice(&state[..n]);
        self.t = state[n] as usize;
        Ok(())
    }
}
