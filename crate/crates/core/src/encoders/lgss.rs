//! A linear-Gaussian state-space model with known parameters, in the shape
//! of a particle model so the batched filter can be checked against the
//! Kalman oracle. Covariances must be diagonal.

use nalgebra::DMatrix;

use super::particle::{ParticleBelief, ParticleModel, StepNoise};
use crate::diffmath::{Binding, DiagGaussian, Tensor, Var};
use crate::envs::LinearGaussianSsm;
use crate::error::{Error, Result};

pub struct LgssParticleModel {
    a_t: Var,
    b_t: Var,
    c_t: Var,
    q_std: Tensor,
    r_std: Tensor,
    m0: Tensor,
    p0_std: Tensor,
}

/// The (all-positive) diagonal square root of a diagonal matrix.
fn diag_std(m: &DMatrix<f64>, name: &str) -> Result<Tensor> {
    let n = m.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0));
    if !diagonal || (0..n).any(|i| !(m[(i, i)] > 0.0)) {
        return Err(Error::Contract(format!("{name} must be diagonal with positive entries")));
    }
    Ok(Tensor::row(&(0..n).map(|i| m[(i, i)].sqrt()).collect::<Vec<_>>()))
}

fn transposed(m: &DMatrix<f64>) -> Var {
    let t = m.transpose();
    let data = (0..t.nrows())
        .flat_map(|i| (0..t.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| t[(i, j)])
        .collect();
    Var::leaf(Tensor::new(t.nrows(), t.ncols(), data).expect("matrix shape"))
}

fn rows_of(row: &Tensor, n: usize) -> Var {
    Var::leaf(row.clone()).repeat_rows(n)
}

impl LgssParticleModel {
    pub fn new(model: &LinearGaussianSsm) -> Result<Self> {
        Ok(Self {
            a_t: transposed(&model.a),
            b_t: transposed(&model.b),
            c_t: transposed(&model.c),
            q_std: diag_std(&model.q, "Q")?,
            r_std: diag_std(&model.r, "R")?,
            m0: Tensor::row(model.m0.as_slice()),
            p0_std: diag_std(&model.p0, "P0")?,
        })
    }
}

impl ParticleModel for LgssParticleModel {
    type Ctx = Var;

    fn embed(&self, _: &Binding, a_prev: &Var, _: &Var, k: usize) -> Result<Var> {
        Ok(a_prev.repeat_rows(k))
    }

    fn transition(&self, _: &Binding, h: &Var, a: &Var) -> Result<DiagGaussian> {
        let mut mean = h.matmul(&self.a_t);
        if self.b_t.rows() > 0 {
            mean = mean.add(&a.matmul(&self.b_t));
        }
        DiagGaussian::new(mean, rows_of(&self.q_std, h.rows()))
    }

    fn proposal(&self, _: &Binding, _: &Var, _: &Var) -> Result<Option<DiagGaussian>> {
        Ok(None)
    }

    fn emission(&self, _: &Binding, _: &Var, z: &Var, _: &Var) -> Result<DiagGaussian> {
        DiagGaussian::new(z.matmul(&self.c_t), rows_of(&self.r_std, z.rows()))
    }

    fn advance(&self, _: &Binding, _: &Var, z: &Var, _: &Var) -> Result<(Var, Var)> {
        Ok((z.clone(), z.clone()))
    }

    fn summarize(&self, _: &Binding, _: &Var, _: &Var, _: &Var) -> Result<Option<Var>> {
        Ok(None)
    }

    /// Particles drawn from the prior on `s_0`.
    fn initial(&self, _: &Binding, batch: usize, k: usize, noise: &mut dyn StepNoise) -> Result<ParticleBelief> {
        let n = self.m0.cols();
        let eps = noise.normals(batch * k, n);
        let mean = self.m0.clone();
        let std = self.p0_std.clone();
        let h = Var::leaf(Tensor::new(
            batch * k,
            n,
            (0..batch * k * n)
                .map(|i| mean.data()[i % n] + std.data()[i % n] * eps.data()[i])
                .collect(),
        )?);
        Ok(ParticleBelief {
            z: h.clone(),
            h,
            logw: Var::leaf(Tensor::filled(batch, k, -(k as f64).ln())),
            summary: None,
            k,
        })
    }
}
