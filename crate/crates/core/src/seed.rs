//! Deterministic fan-out of a master seed into independent RNG streams.
//!
//! Every random draw in the simulator comes from a [`ChaCha8Rng`] obtained
//! through [`rng`]. A stream is addressed by a path of `u64` labels
//! (study id, trajectory index, trial index, frame index, ...). Each label is
//! folded into the seed with one SplitMix64 round, so the streams for
//! `(seed, 1, 2)` and `(seed, 2, 1)` are unrelated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels for the top-level studies.
pub mod label {
    pub const LATENCY: u64 = 0x4c41_5445_4e43_5901;
    pub const SENSITIVITY: u64 = 0x5345_4e53_4954_0002;
    pub const BER: u64 = 0x4245_5200_0000_0003;
    pub const POWER: u64 = 0x504f_5745_5200_0004;

    // sub-streams used inside the sandbox
    pub const SCENE: u64 = 0x5343_454e_4500_0010;
    pub const TRAJECTORY: u64 = 0x5452_414a_0000_0011;
    pub const OBSERVATION_NOISE: u64 = 0x4f42_534e_0000_0012;
    pub const CORRUPTION: u64 = 0x434f_5252_0000_0013;
    pub const BOOTSTRAP: u64 = 0x424f_4f54_0000_0014;
    pub const CHANNEL: u64 = 0x4348_414e_0000_0015;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a label path into a single 64-bit seed.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// RNG for the stream addressed by `path` under `master`.
pub fn rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, path))
}
