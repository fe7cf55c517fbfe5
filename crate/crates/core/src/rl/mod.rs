//! Actor-critic training: targets, losses, the update loop and evaluation.

mod agent;
mod eval;
mod losses;
mod policy;
mod targets;
mod train;

pub use agent::{Agent, AgentSpec, EncoderKind};
pub use eval::{evaluate, EvalReport};
pub use losses::{a2c_losses, elbo_loss, joint_loss, A2cLosses, LossWeights, RolloutSegment};
pub use policy::{PolicyDist, PolicyHead};
pub use targets::compute_targets;
pub use train::{LatentValues, SegmentReport, TrainSettings, Trainer, TrainerState, RETURN_WINDOW};
