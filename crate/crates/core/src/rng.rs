//! Seed derivation.
//!
//! Every stochastic operation takes an explicit `u64` seed. Independent
//! sub-streams (one per ensemble draw, trial, shifted evaluation, ...) are
//! derived by hashing the parent seed together with a path of integer labels
//! into a ChaCha key, so the stream for a given label path never depends on
//! how many other streams were drawn or on which thread drew them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with `path` into a single 64-bit child seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for &label in path {
        state ^= label.wrapping_mul(GOLDEN).rotate_left(17) ^ acc;
        acc = splitmix64(&mut state);
    }
    acc
}

/// Generator for the sub-stream identified by `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> Rng {
    let mut state = derive_seed(seed, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
