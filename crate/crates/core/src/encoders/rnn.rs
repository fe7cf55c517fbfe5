//! GRU history encoder.

use rand::Rng;

use super::dvrl::EMBED_DIM;
use crate::diffmath::{gaussian_logpdf, Binding, GaussianHead, GruCell, ParamGroup, ParamStore, ReluMlp, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RnnEncoder {
    pub d_obs: usize,
    pub d_action: usize,
    pub d_h: usize,
    phi_o: ReluMlp,
    phi_a: ReluMlp,
    gru: GruCell,
    recon: Option<GaussianHead>,
}

impl RnnEncoder {
    /// `recon` adds a decoder `p(o_t | h_{t−1})` whose negative
    /// log-likelihood is returned by [`step`](Self::step).
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        d_obs: usize,
        d_action: usize,
        d_h: usize,
        recon: bool,
        rng: &mut R,
    ) -> Self {
        let m = ParamGroup::Model;
        let e = EMBED_DIM;
        Self {
            d_obs,
            d_action,
            d_h,
            phi_o: ReluMlp::new(store, "rnn.phi_o", m, d_obs, &[e, e], rng),
            phi_a: ReluMlp::new(store, "rnn.phi_a", m, d_action, &[e], rng),
            gru: GruCell::new(store, "rnn.gru", m, 2 * e, d_h, rng),
            recon: recon.then(|| GaussianHead::new(store, "rnn.recon", m, d_h, d_h, d_obs, rng)),
        }
    }

    pub fn has_recon(&self) -> bool {
        self.recon.is_some()
    }

    /// The fixed zero initial state, `batch × d_h`.
    pub fn initial(&self, batch: usize) -> Var {
        Var::leaf(Tensor::zeros(batch, self.d_h))
    }

    /// `h' = GRU(h, [φ^o(o), φ^a(a_prev)])`, plus `−log p(o | h)` per row
    /// when reconstruction is on.
    pub fn step(&self, bind: &Binding, h: &Var, a_prev: &Var, obs: &Var) -> Result<(Var, Option<Var>)> {
        if h.rows() != obs.rows() || a_prev.rows() != obs.rows() {
            return Err(Error::Shape(format!(
                "rnn step: h {:?}, a {:?}, o {:?}",
                h.shape(),
                a_prev.shape(),
                obs.shape()
            )));
        }
        let x = Var::concat_cols(&[self.phi_o.forward(bind, obs)?, self.phi_a.forward(bind, a_prev)?]);
        let next = self.gru.step(bind, h, &x)?;
        let recon = match &self.recon {
            Some(head) => Some(gaussian_logpdf(obs, &head.forward(bind, h)?)?.neg()),
            None => None,
        };
        Ok((next, recon))
    }
}
