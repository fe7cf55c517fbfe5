//! Seeded, independent random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream derived from
//! `(seed, domain, index)`, so one environment's draws never depend on how
//! many draws another environment or the agent made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Parameter initialisation.
    Init,
    /// Resampling, reparameterisation noise and action sampling.
    Agent,
    /// Encoder steps used only to bootstrap value targets.
    Bootstrap,
    /// Environment noise, indexed by environment.
    Env,
    /// Evaluation episodes.
    Eval,
}

impl Domain {
    fn salt(self) -> u64 {
        match self {
            Domain::Init => 0x51_7cc1_b727_220a_95,
            Domain::Agent => 0x2545_f491_4f6c_dd1d,
            Domain::Bootstrap => 0x9e37_79b9_7f4a_7c15,
            Domain::Env => 0xd6e8_feb8_6659_fd93,
            Domain::Eval => 0xa076_1d64_78bd_642f,
        }
    }
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.salt());
    rng.set_stream(index);
    rng
}

/// Position of a stream, enough to restore it exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &StreamRng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}
