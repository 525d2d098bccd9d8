//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream whose
//! key is derived from `(seed, domain)`, whose stream id is a primary index
//! (sample, block) and whose word position is a secondary index (line).
//! Parallel scheduling therefore never changes a result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share keys.
pub mod domain {
    pub const WAVE: u64 = 1;
    pub const LINE: u64 = 2;
    pub const NORM_PRODUCT: u64 = 3;
    pub const SINGULAR: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const POINTS: u64 = 6;
    pub const SPHERE: u64 = 7;
}

/// Words reserved per secondary index; a single line never consumes this many.
const WORDS_PER_SLOT: u128 = 1 << 24;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A generator for slot `(primary, secondary)` of the stream family `(seed, domain)`.
pub fn stream(seed: u64, domain: u64, primary: u64, secondary: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed) ^ domain.rotate_left(32);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(primary);
    rng.set_word_pos(u128::from(secondary) * WORDS_PER_SLOT);
    rng
}
