//! Deterministic random-stream derivation.
//!
//! Every stochastic routine in the workspace draws from a ChaCha8 stream
//! whose 256-bit key is derived from a master seed plus a path of integer
//! tags (member index, cell index, chain index, …). The derivation is a
//! SplitMix64 chain, so identical `(seed, tags)` yield identical streams on
//! every platform, and sibling streams are statistically independent.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent ChaCha8 stream from a master seed and a tag path.
pub fn stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = mix_state(master, tags);
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derives a child seed from a master seed and a tag path.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    let mut state = mix_state(master, tags);
    splitmix64(&mut state)
}

fn mix_state(master: u64, tags: &[u64]) -> u64 {
    let mut state = master ^ 0x6a09_e667_f3bc_c908;
    splitmix64(&mut state);
    for &tag in tags {
        state ^= tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        splitmix64(&mut state);
    }
    state
}
