//! Seeded randomness.
//!
//! Every random stream in the crate is a ChaCha8 keystream keyed by a 64-bit
//! seed, so results depend only on the seed and never on thread scheduling or
//! platform. Independent sub-streams (per class, per utterance, per speaker)
//! are keyed by [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a stream index into a seed (splitmix64 finalizer over both words).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform sample in the open interval (0, 1); never returns an endpoint, so
/// logarithms in inverse-CDF samplers stay finite.
pub fn open01(rng: &mut Rng) -> f64 {
    use rand::RngCore;
    // 53 random bits, offset by half an ulp.
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
