//! Seed derivation. Every replication and purpose gets its own ChaCha
//! stream under one base seed, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Truth = 0,
    Testing = 1,
    Chain = 2,
}

const PURPOSES: u64 = 4;

/// Stream `rep * 4 + purpose` of the ChaCha8 generator keyed by `seed`.
pub fn stream(seed: u64, rep: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep * PURPOSES + purpose as u64);
    rng
}
