//! Counter-based uniform draws.
//!
//! Every draw is a pure function of `(seed, draw_index)`: it is the
//! `draw_index`-th output of a SplitMix64 stream whose initial state is the
//! SplitMix64 hash of `seed`. No generator state is carried between draws,
//! so the same pair always reproduces the same value.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Raw 64-bit output for `(seed, draw_index)`.
pub fn draw_u64(seed: u64, draw_index: u64) -> u64 {
    let state = mix64(seed.wrapping_add(GOLDEN_GAMMA));
    mix64(state.wrapping_add(draw_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Uniform in `[0, 1)` with 53 bits of resolution.
pub fn draw_uniform(seed: u64, draw_index: u64) -> f64 {
    (draw_u64(seed, draw_index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF lookup: first index whose cumulative mass exceeds `u`.
///
/// Falls back to the last positive-mass index when rounding leaves the
/// cumulative sum just under `u`, so zero-mass entries are never returned.
pub fn inverse_cdf(weights: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cumulative += w;
            last_positive = i;
            if u < cumulative {
                return i;
            }
        }
    }
    last_positive
}
