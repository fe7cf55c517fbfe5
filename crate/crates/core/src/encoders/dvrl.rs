//! The particle-belief encoder: a learned latent model filtered with `K`
//! particles, summarised by a second GRU.

use rand::Rng;

use super::particle::{ParticleBelief, ParticleModel, StepNoise};
use crate::diffmath::{Binding, DiagGaussian, GaussianHead, GruCell, ParamGroup, ParamId, ParamStore, ReluMlp, Tensor, Var};
use crate::error::{Error, Result};

/// Width of the observation and action embeddings.
pub const EMBED_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DvrlDims {
    pub obs: usize,
    pub action: usize,
    pub h: usize,
    pub z: usize,
}

#[derive(Debug, Clone)]
pub struct DvrlModel {
    pub dims: DvrlDims,
    phi_o: ReluMlp,
    phi_a: ReluMlp,
    phi_z: ReluMlp,
    transition: GaussianHead,
    proposal: GaussianHead,
    decoder: GaussianHead,
    psi: GruCell,
    summary: GruCell,
    h0: ParamId,
    z0: ParamId,
}

/// Embedded `a_{t−1}` and `o_t`, repeated per particle.
pub struct DvrlCtx {
    xa: Var,
    xo: Var,
}

impl DvrlModel {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, dims: DvrlDims, rng: &mut R) -> Self {
        let m = ParamGroup::Model;
        let (dh, dz) = (dims.h, dims.z);
        let e = EMBED_DIM;
        Self {
            dims,
            phi_o: ReluMlp::new(store, "dvrl.phi_o", m, dims.obs, &[e, e], rng),
            phi_a: ReluMlp::new(store, "dvrl.phi_a", m, dims.action, &[e], rng),
            phi_z: ReluMlp::new(store, "dvrl.phi_z", m, dz, &[dh], rng),
            transition: GaussianHead::new(store, "dvrl.transition", m, dh + e, dh, dz, rng),
            proposal: GaussianHead::new(store, "dvrl.proposal", ParamGroup::Proposal, dh + 2 * e, dh, dz, rng),
            decoder: GaussianHead::new(store, "dvrl.decoder", m, 2 * dh + e, dh, dims.obs, rng),
            psi: GruCell::new(store, "dvrl.psi", m, dh + 2 * e, dh, rng),
            summary: GruCell::new(store, "dvrl.summary", m, 1 + 2 * dh, dh, rng),
            h0: store.add("dvrl.h0", m, Tensor::zeros(1, dh)),
            z0: store.add("dvrl.z0", m, Tensor::zeros(1, dz)),
        }
    }

    pub fn summary_dim(&self) -> usize {
        self.dims.h
    }

    /// GRU scan over `(w̄_k, φ^z(z_k), h_k)` in particle order from a zero
    /// state; `w̄` are the normalised weights.
    pub fn summarize_particles(&self, bind: &Binding, h: &Var, xz: &Var, logw: &Var) -> Result<Var> {
        let (b, k) = logw.shape();
        if h.rows() != b * k || xz.rows() != b * k {
            return Err(Error::Shape(format!(
                "summary of {} particles for {b}×{k} weights",
                h.rows()
            )));
        }
        let w = logw.add_col(&logw.logsumexp_rows().neg()).exp();
        let mut state = Var::leaf(Tensor::zeros(b, self.dims.h));
        for j in 0..k {
            let rows: Vec<usize> = (0..b).map(|i| i * k + j).collect();
            let x = Var::concat_cols(&[w.slice_cols(j, 1), xz.gather_rows(&rows), h.gather_rows(&rows)]);
            state = self.summary.step(bind, &state, &x)?;
        }
        Ok(state)
    }
}

impl ParticleModel for DvrlModel {
    type Ctx = DvrlCtx;

    fn embed(&self, bind: &Binding, a_prev: &Var, obs: &Var, k: usize) -> Result<DvrlCtx> {
        Ok(DvrlCtx {
            xa: self.phi_a.forward(bind, a_prev)?.repeat_rows(k),
            xo: self.phi_o.forward(bind, obs)?.repeat_rows(k),
        })
    }

    fn transition(&self, bind: &Binding, h: &Var, ctx: &DvrlCtx) -> Result<DiagGaussian> {
        self.transition.forward(bind, &Var::concat_cols(&[h.clone(), ctx.xa.clone()]))
    }

    fn proposal(&self, bind: &Binding, h: &Var, ctx: &DvrlCtx) -> Result<Option<DiagGaussian>> {
        let x = Var::concat_cols(&[h.clone(), ctx.xa.clone(), ctx.xo.clone()]);
        self.proposal.forward(bind, &x).map(Some)
    }

    fn emission(&self, bind: &Binding, h: &Var, z: &Var, ctx: &DvrlCtx) -> Result<DiagGaussian> {
        let xz = self.phi_z.forward(bind, z)?;
        self.decoder.forward(bind, &Var::concat_cols(&[h.clone(), xz, ctx.xa.clone()]))
    }

    fn advance(&self, bind: &Binding, h: &Var, z: &Var, ctx: &DvrlCtx) -> Result<(Var, Var)> {
        let xz = self.phi_z.forward(bind, z)?;
        let x = Var::concat_cols(&[xz.clone(), ctx.xa.clone(), ctx.xo.clone()]);
        Ok((self.psi.step(bind, h, &x)?, xz))
    }

    fn summarize(&self, bind: &Binding, h: &Var, features: &Var, logw: &Var) -> Result<Option<Var>> {
        self.summarize_particles(bind, h, features, logw).map(Some)
    }

    /// Every particle starts at the trainable `(tanh(h0), z0)` with uniform
    /// weights; nothing is sampled.
    fn initial(
        &self,
        bind: &Binding,
        batch: usize,
        k: usize,
        _noise: &mut dyn StepNoise,
    ) -> Result<ParticleBelief> {
        if k == 0 || batch == 0 {
            return Err(Error::Contract("need at least one particle and one belief".into()));
        }
        let h = bind.get(self.h0).tanh().repeat_rows(batch * k);
        let z = bind.get(self.z0).repeat_rows(batch * k);
        let logw = Var::leaf(Tensor::filled(batch, k, -(k as f64).ln()));
        let xz = self.phi_z.forward(bind, &z)?;
        let summary = self.summarize_particles(bind, &h, &xz, &logw)?;
        Ok(ParticleBelief {
            h,
            z,
            logw,
            summary: Some(summary),
            k,
        })
    }
}

/// Wraps a model so its proposal is exactly its transition distribution,
/// while still going through the full importance-weight expression.
pub struct TiedProposal<'a, M>(pub &'a M);

impl<M: ParticleModel> ParticleModel for TiedProposal<'_, M> {
    type Ctx = M::Ctx;

    fn embed(&self, bind: &Binding, a_prev: &Var, obs: &Var, k: usize) -> Result<M::Ctx> {
        self.0.embed(bind, a_prev, obs, k)
    }
    fn transition(&self, bind: &Binding, h: &Var, ctx: &M::Ctx) -> Result<DiagGaussian> {
        self.0.transition(bind, h, ctx)
    }
    fn proposal(&self, bind: &Binding, h: &Var, ctx: &M::Ctx) -> Result<Option<DiagGaussian>> {
        self.0.transition(bind, h, ctx).map(Some)
    }
    fn emission(&self, bind: &Binding, h: &Var, z: &Var, ctx: &M::Ctx) -> Result<DiagGaussian> {
        self.0.emission(bind, h, z, ctx)
    }
    fn advance(&self, bind: &Binding, h: &Var, z: &Var, ctx: &M::Ctx) -> Result<(Var, Var)> {
        self.0.advance(bind, h, z, ctx)
    }
    fn summarize(&self, bind: &Binding, h: &Var, f: &Var, logw: &Var) -> Result<Option<Var>> {
        self.0.summarize(bind, h, f, logw)
    }
    fn initial(&self, bind: &Binding, batch: usize, k: usize, noise: &mut dyn StepNoise) -> Result<ParticleBelief> {
        self.0.initial(bind, batch, k, noise)
    }
}

/// The same model with the proposal replaced by the transition prior and
/// the density ratio dropped from the weights.
pub struct Bootstrap<'a, M>(pub &'a M);

impl<M: ParticleModel> ParticleModel for Bootstrap<'_, M> {
    type Ctx = M::Ctx;

    fn embed(&self, bind: &Binding, a_prev: &Var, obs: &Var, k: usize) -> Result<M::Ctx> {
        self.0.embed(bind, a_prev, obs, k)
    }
    fn transition(&self, bind: &Binding, h: &Var, ctx: &M::Ctx) -> Result<DiagGaussian> {
        self.0.transition(bind, h, ctx)
    }
    fn proposal(&self, _: &Binding, _: &Var, _: &M::Ctx) -> Result<Option<DiagGaussian>> {
        Ok(None)
    }
    fn emission(&self, bind: &Binding, h: &Var, z: &Var, ctx: &M::Ctx) -> Result<DiagGaussian> {
        self.0.emission(bind, h, z, ctx)
    }
    fn advance(&self, bind: &Binding, h: &Var, z: &Var, ctx: &M::Ctx) -> Result<(Var, Var)> {
        self.0.advance(bind, h, z, ctx)
    }
    fn summarize(&self, bind: &Binding, h: &Var, f: &Var, logw: &Var) -> Result<Option<Var>> {
        self.0.summarize(bind, h, f, logw)
    }
    fn initial(&self, bind: &Binding, batch: usize, k: usize, noise: &mut dyn StepNoise) -> Result<ParticleBelief> {
        self.0.initial(bind, batch, k, noise)
    }
}
