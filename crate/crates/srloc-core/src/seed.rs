//! Deterministic RNG stream derivation.
//!
//! Experiments need one independent generator per (sweep point, trial,
//! redraw) so that results are bit-reproducible regardless of scheduling.
//! Streams are derived by absorbing the index words into a SplitMix64 chain
//! and expanding the final state into a 32-byte ChaCha key.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name of the generator family, recorded in experiment outputs.
pub const GENERATOR_NAME: &str = "chacha8";

/// One SplitMix64 step: advances `state` and returns the next output word.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 32-byte seed from a master seed and a path of index words.
pub fn derive_seed(master: u64, words: &[u64]) -> [u8; 32] {
    let mut state = master;
    let _ = splitmix64(&mut state);
    for &w in words {
        state ^= w.wrapping_mul(0xA24B_AED4_963E_E407);
        let _ = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    seed
}

/// A ChaCha8 generator on the stream identified by `(master, words)`.
pub fn rng_from(master: u64, words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master, words))
}
