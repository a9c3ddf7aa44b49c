//! Seeded random streams.
//!
//! Every run derives all of its randomness from one 64-bit seed. Components
//! draw from separate named streams so that, for example, changing how many
//! numbers the environment consumes does not shift the policy initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-stream of a run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Env,
    PolicyInit,
    Sampling,
    Eval,
    Data,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Env => 1,
            Stream::PolicyInit => 2,
            Stream::Sampling => 3,
            Stream::Eval => 4,
            Stream::Data => 5,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
