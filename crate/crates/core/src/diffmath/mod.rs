//! Differentiable numerical core: matrices with reverse-mode gradients,
//! distributions, layers, initialisation and optimisation.

pub mod dist;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod nn;
pub mod optim;
pub mod tensor;

pub use dist::{gaussian_entropy, gaussian_logpdf, reparam_sample, Categorical, DiagGaussian};
pub use gradcheck::grad_check;
pub use graph::{log_sum_exp, softplus, Gradients, ParamId, Var};
pub use init::orthogonal;
pub use nn::{Binding, GaussianHead, GruCell, Linear, ParamGroup, ParamStore, ReluMlp};
pub use optim::{clip_global_norm, RmsProp};
pub use tensor::Tensor;
