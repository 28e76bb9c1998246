//! Seed derivation. Each drop gets one root seed; named streams are
//! independent ChaCha streams of that root so adding a stream never
//! perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of SplitMix64 over `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root seed of drop `drop`; independent of scheme and load so that every
/// scheme sees the same UEs, arrivals and fading.
pub fn drop_seed(base_seed: u64, drop: u32) -> u64 {
    splitmix64(splitmix64(base_seed) ^ u64::from(drop))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement = 0,
    Traffic = 1,
    Fading = 2,
    Outcome = 3,
    Kpi = 4,
}

pub fn stream(root: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(which as u64);
    rng
}
