//! Trainable parameters and the layers built from them.
//!
//! Parameters live in a [`ParamStore`] as plain tensors. A forward pass
//! first takes a [`Binding`]: one leaf [`Var`] per parameter holding a
//! snapshot of its current value. Graphs built from an older binding keep
//! the values they were built with, while gradients still land on the
//! same [`ParamId`].

use rand::Rng;

use super::dist::DiagGaussian;
use super::graph::{ParamId, Var};
use super::init::orthogonal;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// The four independently named parameter groups of the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    /// Policy head (ρ).
    Policy,
    /// Value head (η).
    Value,
    /// Generative model, embedders and encoder recurrences (θ).
    Model,
    /// Proposal distribution (φ).
    Proposal,
}

impl ParamGroup {
    pub fn tag(self) -> u8 {
        match self {
            ParamGroup::Policy => 0,
            ParamGroup::Value => 1,
            ParamGroup::Model => 2,
            ParamGroup::Proposal => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => ParamGroup::Policy,
            1 => ParamGroup::Value,
            2 => ParamGroup::Model,
            3 => ParamGroup::Proposal,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub group: ParamGroup,
    pub value: Tensor,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, group: ParamGroup, value: Tensor) -> ParamId {
        self.entries.push(ParamEntry {
            name: name.into(),
            group,
            value,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|e| &mut e.value)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn ids_in(&self, group: ParamGroup) -> Vec<ParamId> {
        (0..self.entries.len())
            .filter(|&i| self.entries[i].group == group)
            .map(ParamId)
            .collect()
    }

    /// Replaces every value from `other`, which must have the same layout.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::Contract(format!(
                "parameter count {} does not match {}",
                other.entries.len(),
                self.entries.len()
            )));
        }
        for (mine, theirs) in self.entries.iter_mut().zip(&other.entries) {
            if mine.name != theirs.name
                || mine.group != theirs.group
                || mine.value.shape() != theirs.value.shape()
            {
                return Err(Error::Contract(format!(
                    "parameter `{}` {:?} does not match `{}` {:?}",
                    theirs.name,
                    theirs.value.shape(),
                    mine.name,
                    mine.value.shape()
                )));
            }
            mine.value = theirs.value.clone();
        }
        Ok(())
    }

    pub fn bind(&self) -> Binding {
        Binding {
            vars: self
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| Var::param(ParamId(i), e.value.clone()))
                .collect(),
        }
    }
}

/// Leaf variables for one forward pass.
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    /// Uses `vars` in store order in place of the stored parameters, e.g.
    /// leaves whose values are perturbed by a finite-difference check.
    pub fn from_vars(store: &ParamStore, vars: Vec<Var>) -> Result<Self> {
        if vars.len() != store.len()
            || vars.iter().zip(&store.entries).any(|(v, e)| v.shape() != e.value.shape())
        {
            return Err(Error::Shape("binding does not match the parameter store".into()));
        }
        Ok(Self { vars })
    }

    pub fn get(&self, id: ParamId) -> &Var {
        &self.vars[id.0]
    }
}

/// Affine map `x W + b`, weights `in × out`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        d_in: usize,
        d_out: usize,
        rng: &mut R,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            group,
            orthogonal(d_in, d_out, 1.0, rng),
        );
        let bias = store.add(format!("{name}.bias"), group, Tensor::zeros(1, d_out));
        Self {
            weight,
            bias,
            d_in,
            d_out,
        }
    }

    pub fn forward(&self, bind: &Binding, x: &Var) -> Result<Var> {
        if x.cols() != self.d_in {
            return Err(Error::Shape(format!(
                "linear layer expects {} inputs, got {}",
                self.d_in,
                x.cols()
            )));
        }
        Ok(x.matmul(bind.get(self.weight)).add_row(bind.get(self.bias)))
    }
}

/// Stack of linear layers with a ReLU after each one.
#[derive(Debug, Clone)]
pub struct ReluMlp {
    layers: Vec<Linear>,
}

impl ReluMlp {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        d_in: usize,
        widths: &[usize],
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = d_in;
        for (i, &w) in widths.iter().enumerate() {
            layers.push(Linear::new(store, &format!("{name}.{i}"), group, prev, w, rng));
            prev = w;
        }
        Self { layers }
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().map_or(0, |l| l.d_out)
    }

    pub fn forward(&self, bind: &Binding, x: &Var) -> Result<Var> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(bind, &h)?.relu();
        }
        Ok(h)
    }
}

/// Lower bound added to every softplus standard deviation.
pub const STD_FLOOR: f64 = 1e-6;

/// One shared ReLU layer feeding separate mean and std heads; the std head
/// goes through softplus plus [`STD_FLOOR`].
#[derive(Debug, Clone, Copy)]
pub struct GaussianHead {
    joint: Linear,
    mean: Linear,
    std: Linear,
}

impl GaussianHead {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        d_in: usize,
        d_hidden: usize,
        d_out: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            joint: Linear::new(store, &format!("{name}.joint"), group, d_in, d_hidden, rng),
            mean: Linear::new(store, &format!("{name}.mean"), group, d_hidden, d_out, rng),
            std: Linear::new(store, &format!("{name}.std"), group, d_hidden, d_out, rng),
        }
    }

    pub fn d_out(&self) -> usize {
        self.mean.d_out
    }

    pub fn forward(&self, bind: &Binding, x: &Var) -> Result<DiagGaussian> {
        let hidden = self.joint.forward(bind, x)?.relu();
        let mean = self.mean.forward(bind, &hidden)?;
        let std = self.std.forward(bind, &hidden)?.softplus().add_scalar(STD_FLOOR);
        DiagGaussian::new(mean, std)
    }
}

/// GRU cell.
///
/// Gate convention (column blocks `[r | u | n]` of the packed weights):
///
/// ```text
/// r  = σ(x W_xr + b_xr + h W_hr + b_hr)
/// u  = σ(x W_xu + b_xu + h W_hu + b_hu)
/// n  = tanh(x W_xn + b_xn + r ⊙ (h W_hn + b_hn))
/// h' = u ⊙ h + (1 − u) ⊙ n
/// ```
///
/// The update gate `u` keeps the old state. With all weights and biases at
/// zero, `u = ½` and `n = 0`, so `h' = h / 2`.
#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b_x: ParamId,
    pub b_h: ParamId,
    pub d_in: usize,
    pub d_h: usize,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        d_in: usize,
        d_h: usize,
        rng: &mut R,
    ) -> Self {
        // Each gate block is initialised as its own orthogonal matrix.
        let mut w_x = Tensor::zeros(d_in, 3 * d_h);
        let mut w_h = Tensor::zeros(d_h, 3 * d_h);
        for gate in 0..3 {
            let qx = orthogonal(d_in, d_h, 1.0, rng);
            let qh = orthogonal(d_h, d_h, 1.0, rng);
            for r in 0..d_in {
                for c in 0..d_h {
                    w_x.set(r, gate * d_h + c, qx.get(r, c));
                }
            }
            for r in 0..d_h {
                for c in 0..d_h {
                    w_h.set(r, gate * d_h + c, qh.get(r, c));
                }
            }
        }
        Self {
            w_x: store.add(format!("{name}.w_x"), group, w_x),
            w_h: store.add(format!("{name}.w_h"), group, w_h),
            b_x: store.add(format!("{name}.b_x"), group, Tensor::zeros(1, 3 * d_h)),
            b_h: store.add(format!("{name}.b_h"), group, Tensor::zeros(1, 3 * d_h)),
            d_in,
            d_h,
        }
    }

    pub fn step(&self, bind: &Binding, h: &Var, x: &Var) -> Result<Var> {
        if h.cols() != self.d_h || x.cols() != self.d_in || h.rows() != x.rows() {
            return Err(Error::Shape(format!(
                "gru({}→{}) given h {:?} and x {:?}",
                self.d_in,
                self.d_h,
                h.shape(),
                x.shape()
            )));
        }
        let d = self.d_h;
        let gx = x.matmul(bind.get(self.w_x)).add_row(bind.get(self.b_x));
        let gh = h.matmul(bind.get(self.w_h)).add_row(bind.get(self.b_h));
        let r = gx.slice_cols(0, d).add(&gh.slice_cols(0, d)).sigmoid();
        let u = gx.slice_cols(d, d).add(&gh.slice_cols(d, d)).sigmoid();
        let n = gx
            .slice_cols(2 * d, d)
            .add(&r.mul(&gh.slice_cols(2 * d, d)))
            .tanh();
        Ok(n.add(&u.mul(&h.sub(&n))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_all(store: &mut ParamStore) {
        for i in 0..store.len() {
            let t = store.get_mut(ParamId(i));
            t.data_mut().fill(0.0);
        }
    }

    #[test]
    fn zero_gru_halves_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, "g", ParamGroup::Model, 3, 4, &mut rng);
        zero_all(&mut store);
        let bind = store.bind();
        let h = Var::leaf(Tensor::row(&[0.2, -0.4, 0.9, -0.99]));
        let x = Var::leaf(Tensor::row(&[1.0, 2.0, 3.0]));
        let out = gru.step(&bind, &h, &x).unwrap();
        assert_eq!(out.value().data(), &[0.1, -0.2, 0.45, -0.495]);
    }

    #[test]
    fn gru_shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, "g", ParamGroup::Model, 3, 4, &mut rng);
        let bind = store.bind();
        let h = Var::leaf(Tensor::zeros(1, 4));
        let x = Var::leaf(Tensor::zeros(1, 2));
        assert!(matches!(gru.step(&bind, &h, &x), Err(Error::Shape(_))));
    }

    #[test]
    fn linear_rejects_wrong_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let l = Linear::new(&mut store, "l", ParamGroup::Value, 3, 1, &mut rng);
        let bind = store.bind();
        assert!(l.forward(&bind, &Var::leaf(Tensor::zeros(2, 4))).is_err());
        assert_eq!(
            l.forward(&bind, &Var::leaf(Tensor::zeros(2, 3))).unwrap().shape(),
            (2, 1)
        );
    }

    #[test]
    fn groups_are_tracked() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        Linear::new(&mut store, "p", ParamGroup::Policy, 2, 2, &mut rng);
        Linear::new(&mut store, "v", ParamGroup::Value, 2, 1, &mut rng);
        assert_eq!(store.ids_in(ParamGroup::Policy).len(), 2);
        assert_eq!(store.ids_in(ParamGroup::Value), vec![ParamId(2), ParamId(3)]);
        assert_eq!(store.find("v.bias"), Some(ParamId(3)));
    }
}
