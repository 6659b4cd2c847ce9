use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every random stream in the crate is ChaCha8 seeded from a 64-bit value, so
/// results are identical across platforms.
pub(crate) type Rng = ChaCha8Rng;

pub(crate) fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task (epoch, fold, layer).
pub(crate) fn derive(seed: u64, salt: u64) -> Rng {
    seeded(mix(seed, salt))
}

pub(crate) fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser over the combined value
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
