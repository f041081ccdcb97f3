//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream, keyed by
//! the run seed, a purpose tag and an index (usually the epoch), so shuffling,
//! initialization and noise sampling never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Shuffle = 2,
    Noise = 3,
    GradCheck = 4,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | (index & 0xFFFF_FFFF_FFFF));
    rng
}
