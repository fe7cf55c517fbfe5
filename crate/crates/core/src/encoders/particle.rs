//! Batched particle beliefs and the generic resample–propose–weight step.
//!
//! A batch of `B` beliefs with `K` particles each is stored row-major by
//! environment: particle `k` of environment `b` is row `b·K + k`.

use rand::RngCore;

use crate::diffmath::{gaussian_logpdf, reparam_sample, Binding, DiagGaussian, Tensor, Var};
use crate::envs::standard_normals;
use crate::error::{Error, Result};
use crate::inference::{elbo_term, ess, resample_ancestors};

/// Source of the two kinds of randomness a particle step needs.
pub trait StepNoise {
    /// Ancestor indices for one belief, `0..K`.
    fn ancestors(&mut self, logw: &[f64]) -> Result<Vec<usize>>;
    fn normals(&mut self, rows: usize, cols: usize) -> Tensor;
}

/// Draws from a generator, optionally recording every draw.
pub struct RngNoise<'a> {
    rng: &'a mut dyn RngCore,
    tape: Option<&'a mut NoiseTape>,
}

impl<'a> RngNoise<'a> {
    pub fn new(rng: &'a mut dyn RngCore) -> Self {
        Self { rng, tape: None }
    }

    pub fn recording(rng: &'a mut dyn RngCore, tape: &'a mut NoiseTape) -> Self {
        Self {
            rng,
            tape: Some(tape),
        }
    }
}

impl StepNoise for RngNoise<'_> {
    fn ancestors(&mut self, logw: &[f64]) -> Result<Vec<usize>> {
        let u = resample_ancestors(logw, self.rng)?;
        if let Some(t) = self.tape.as_deref_mut() {
            t.ancestors.push(u.clone());
        }
        Ok(u)
    }

    fn normals(&mut self, rows: usize, cols: usize) -> Tensor {
        let e = Tensor::new(rows, cols, standard_normals(self.rng, rows * cols))
            .expect("noise shape");
        if let Some(t) = self.tape.as_deref_mut() {
            t.normals.push(e.clone());
        }
        e
    }
}

/// Recorded ancestors and Gaussian noise, replayable in the same order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NoiseTape {
    pub ancestors: Vec<Vec<usize>>,
    pub normals: Vec<Tensor>,
}

impl NoiseTape {
    pub fn replay(&self) -> FrozenNoise<'_> {
        FrozenNoise {
            tape: self,
            next_ancestor: 0,
            next_normal: 0,
        }
    }
}

/// Replays a [`NoiseTape`]; running past its end or asking for a different
/// shape panics, since that means the replayed computation diverged.
pub struct FrozenNoise<'a> {
    tape: &'a NoiseTape,
    next_ancestor: usize,
    next_normal: usize,
}

impl StepNoise for FrozenNoise<'_> {
    fn ancestors(&mut self, logw: &[f64]) -> Result<Vec<usize>> {
        let u = self.tape.ancestors[self.next_ancestor].clone();
        self.next_ancestor += 1;
        assert_eq!(u.len(), logw.len(), "replayed ancestors for a different K");
        Ok(u)
    }

    fn normals(&mut self, rows: usize, cols: usize) -> Tensor {
        let e = self.tape.normals[self.next_normal].clone();
        self.next_normal += 1;
        assert_eq!(e.shape(), (rows, cols), "replayed noise of a different shape");
        e
    }
}

/// Weighted particles for a batch of beliefs.
#[derive(Debug, Clone)]
pub struct ParticleBelief {
    /// Deterministic states, `B·K × d_h`.
    pub h: Var,
    /// Stochastic latents, `B·K × d_z`.
    pub z: Var,
    /// Log-weights, `B × K`.
    pub logw: Var,
    /// Particle-set summary, `B × d_s`, when the model has one.
    pub summary: Option<Var>,
    pub k: usize,
}

impl ParticleBelief {
    pub fn batch(&self) -> usize {
        self.logw.rows()
    }

    pub fn detach(&self) -> Self {
        Self {
            h: self.h.detach(),
            z: self.z.detach(),
            logw: self.logw.detach(),
            summary: self.summary.as_ref().map(Var::detach),
            k: self.k,
        }
    }

    /// Per-belief effective sample size.
    pub fn ess(&self) -> Result<Vec<f64>> {
        (0..self.batch())
            .map(|b| ess(self.logw.value().row_slice(b)))
            .collect()
    }

    /// Takes belief `b` from `other` wherever `replace[b]` is set.
    pub fn select(&self, other: &ParticleBelief, replace: &[bool]) -> Result<Self> {
        let b = self.batch();
        if other.batch() != b || other.k != self.k || replace.len() != b {
            return Err(Error::Shape("belief batches do not line up".into()));
        }
        let k = self.k;
        let per_particle: Vec<usize> = (0..b * k)
            .map(|i| if replace[i / k] { b * k + i } else { i })
            .collect();
        let per_belief: Vec<usize> = (0..b).map(|i| if replace[i] { b + i } else { i }).collect();
        let pick = |mine: &Var, theirs: &Var, idx: &[usize]| {
            Var::concat_rows(&[mine.clone(), theirs.clone()]).gather_rows(idx)
        };
        Ok(Self {
            h: pick(&self.h, &other.h, &per_particle),
            z: pick(&self.z, &other.z, &per_particle),
            logw: pick(&self.logw, &other.logw, &per_belief),
            summary: match (&self.summary, &other.summary) {
                (Some(a), Some(c)) => Some(pick(a, c, &per_belief)),
                _ => None,
            },
            k,
        })
    }
}

/// A latent model with a proposal, driven by [`particle_step`].
pub trait ParticleModel {
    /// Per-step inputs shared by every particle, already repeated to `B·K` rows.
    type Ctx;

    fn embed(&self, bind: &Binding, a_prev: &Var, obs: &Var, k: usize) -> Result<Self::Ctx>;
    /// `p(z_t | h_{t−1}, a_{t−1})`.
    fn transition(&self, bind: &Binding, h: &Var, ctx: &Self::Ctx) -> Result<DiagGaussian>;
    /// `q(z_t | h_{t−1}, a_{t−1}, o_t)`; `None` proposes from the transition.
    fn proposal(&self, bind: &Binding, h: &Var, ctx: &Self::Ctx) -> Result<Option<DiagGaussian>>;
    /// `p(o_t | h_{t−1}, z_t, a_{t−1})`.
    fn emission(&self, bind: &Binding, h: &Var, z: &Var, ctx: &Self::Ctx) -> Result<DiagGaussian>;
    /// Returns `h_t` and the per-particle features fed to the summary.
    fn advance(&self, bind: &Binding, h: &Var, z: &Var, ctx: &Self::Ctx) -> Result<(Var, Var)>;
    fn summarize(&self, bind: &Binding, h: &Var, features: &Var, logw: &Var) -> Result<Option<Var>>;
    fn initial(
        &self,
        bind: &Binding,
        batch: usize,
        k: usize,
        noise: &mut dyn StepNoise,
    ) -> Result<ParticleBelief>;
}

/// Result of one filter step.
pub struct ParticleStep {
    pub belief: ParticleBelief,
    /// `log((1/K) Σ_k w_t^k)` per belief, `B × 1`.
    pub elbo_term: Var,
}

/// Resample, propose, weight and advance every particle once.
///
/// With `resample` off each particle keeps its own lineage, which is what
/// the importance-weighted bound needs.
pub fn particle_step<M: ParticleModel + ?Sized>(
    model: &M,
    bind: &Binding,
    belief: &ParticleBelief,
    a_prev: &Var,
    obs: &Var,
    noise: &mut dyn StepNoise,
    resample: bool,
) -> Result<ParticleStep> {
    let (b, k) = (belief.batch(), belief.k);
    if a_prev.rows() != b || obs.rows() != b {
        return Err(Error::Shape(format!(
            "belief batch {b} but {} actions and {} observations",
            a_prev.rows(),
            obs.rows()
        )));
    }
    let mut index = Vec::with_capacity(b * k);
    for row in 0..b {
        let u = if resample {
            noise.ancestors(belief.logw.value().row_slice(row))?
        } else {
            (0..k).collect()
        };
        index.extend(u.into_iter().map(|j| row * k + j));
    }
    // Ancestor choice is not differentiated.
    let h_anc = belief.h.gather_rows(&index);

    let ctx = model.embed(bind, a_prev, obs, k)?;
    let prior = model.transition(bind, &h_anc, &ctx)?;
    let proposal = model.proposal(bind, &h_anc, &ctx)?;
    let q = proposal.as_ref().unwrap_or(&prior);
    let eps = noise.normals(q.rows(), q.dim());
    let z = reparam_sample(q, &eps)?;

    let emission = model.emission(bind, &h_anc, &z, &ctx)?;
    let obs_rep = obs.repeat_rows(k);
    let mut logw = gaussian_logpdf(&obs_rep, &emission)?;
    if let Some(q) = &proposal {
        logw = logw
            .add(&gaussian_logpdf(&z, &prior)?)
            .sub(&gaussian_logpdf(&z, q)?);
    }
    let logw = logw.reshape(b, k);
    let elbo = elbo_term(&logw)?;
    let (h, features) = model.advance(bind, &h_anc, &z, &ctx)?;
    let summary = model.summarize(bind, &h, &features, &logw)?;
    Ok(ParticleStep {
        belief: ParticleBelief {
            h,
            z,
            logw,
            summary,
            k,
        },
        elbo_term: elbo,
    })
}
