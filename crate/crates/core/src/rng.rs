//! Seed derivation. Every random stream in the library is a ChaCha8 stream
//! keyed by a 64-bit seed derived from the master seed and a purpose tag, so
//! results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a list of words into one seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}

// Purpose tags.
pub(crate) const TAG_FRAME: u64 = 0x4652_414d;
pub(crate) const TAG_GROUP: u64 = 0x4752_5550;
pub(crate) const TAG_KMEANS: u64 = 0x4b4d_4e53;
pub(crate) const TAG_INIT: u64 = 0x494e_4954;
pub(crate) const TAG_SIGMA: u64 = 0x5349_474d;
pub(crate) const TAG_NOISE: u64 = 0x4e4f_4953;
pub(crate) const TAG_PHANTOM: u64 = 0x5048_414e;
