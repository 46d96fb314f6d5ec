//! Reproducible random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 keystream whose
//! 256-bit key is `seed (u64 LE) || domain (u64 LE) || 0u128`, and whose
//! 64-bit stream id is the draw index. A Monte-Carlo draw is therefore a pure
//! function of `(seed, domain, index)`, independent of the thread that computes
//! it or of the order in which draws are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Well-known stream domains, kept distinct so that different consumers of
/// one user seed never share a keystream.
pub mod domain {
    pub const GAUSSIAN_MC: u64 = 0x4741_5553_5300_0001;
    pub const RADEMACHER_MC: u64 = 0x5241_4445_4d00_0002;
    pub const MULTISTART: u64 = 0x4d53_5452_5400_0003;
    pub const DESIGN: u64 = 0x4445_5349_474e_0004;
    pub const NOISE: u64 = 0x4e4f_4953_4500_0005;
    pub const REPLICATION: u64 = 0x5245_504c_0000_0006;
}

/// Returns the generator for draw `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, used when one replication needs its own family of
/// streams (e.g. per-replication Monte-Carlo thresholds).
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, domain, index).next_u64()
}
