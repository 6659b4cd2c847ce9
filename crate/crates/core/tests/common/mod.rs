//! Test-only helpers shared by the integration suites.

#![allow(dead_code)]

/// Deterministic pseudo-random values in [-1, 1) (xorshift), independent of
/// the library's generators.
pub fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x2545_F491_4F6C_DD1D) | 1;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}
