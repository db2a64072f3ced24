//! Keyed random streams.
//!
//! Every stochastic unit of work (a question's simulation, one question block
//! of one chain in one loop, ...) draws from its own ChaCha stream derived from
//! the run seed and a tuple of keys. Results are therefore independent of how
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags so that streams of different kinds never collide.
pub mod tag {
    pub const SIM_QUESTION: u64 = 1;
    pub const SIM_EXPERTISE: u64 = 2;
    pub const CHAIN_INIT: u64 = 3;
    pub const QUESTION_BLOCK: u64 = 4;
    pub const RESPONDENT_BLOCK: u64 = 5;
    pub const SINGLE_CHAIN: u64 = 6;
    pub const BCC_CHAIN: u64 = 7;
    pub const CH_CHAIN: u64 = 8;
    pub const BOOTSTRAP: u64 = 9;
    pub const SIM_BCC: u64 = 10;
    pub const SIM_CH: u64 = 11;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Returns the stream for `seed` identified by `keys`.
pub fn stream(seed: u64, keys: &[u64]) -> StreamRng {
    let mut id = splitmix64(keys.len() as u64);
    for &k in keys {
        id = splitmix64(id ^ splitmix64(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
