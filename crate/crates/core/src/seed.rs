//! Deterministic derivation of independent random streams from one episode seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used by the engine for chance events (the Kuhn deal).
pub const DEAL_STREAM: u64 = 1;
/// Stream used by the runner when substituting a fallback action.
pub const FALLBACK_STREAM: u64 = 2;
/// Agents use `AGENT_STREAM_BASE + player`.
pub const AGENT_STREAM_BASE: u64 = 16;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}
