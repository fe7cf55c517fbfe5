//! Belief-state reinforcement learning for partially observable control.
//!
//! The agent encodes its action–observation history either with a GRU or
//! with a differentiable particle filter over a learned latent model, and
//! is trained with synchronous n-step advantage actor-critic. The particle
//! encoder adds a sequential Monte Carlo evidence lower bound to the loss.
//!
//! Modules:
//! - [`diffmath`]: matrices with reverse-mode gradients, distributions,
//!   GRU cells, initialisation and RMSProp.
//! - [`envs`]: Mountain Hike, observation flicker, linear-Gaussian and
//!   discrete HMM environments, and a vectorised auto-resetting stepper.
//! - [`inference`]: resampling, ESS, SMC and IWAE bounds, Kalman and exact
//!   discrete filters.
//! - [`encoders`]: the recurrent and particle-belief history encoders.
//! - [`rl`]: targets, losses, the training loop and evaluation.
//! - [`config`], [`metrics`], [`checkpoint`]: file formats.
//! - [`run`]: a configured training run; [`verify`]: the oracle suites.

pub mod checkpoint;
pub mod config;
pub mod diffmath;
pub mod encoders;
pub mod envs;
mod error;
pub mod inference;
pub mod metrics;
pub mod rl;
pub mod rng;
pub mod run;
pub mod verify;

pub use error::{Error, Result};
