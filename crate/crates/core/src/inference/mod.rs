//! Particle-filter primitives and the exact oracles they are checked against.

mod discrete;
mod kalman;
mod smc;
mod weights;

pub use discrete::{exact_belief_update, particle_belief_to_histogram, total_variation, ExactBelief};
pub use kalman::kalman_log_marginal;
pub use smc::{hmm_filter_histograms, run_smc, HmmBootstrap, LgssBootstrap, SmcModel, SmcOutput};
pub use weights::{elbo_term, elbo_term_value, ess, iwae_elbo, normalized_weights, resample_ancestors};
