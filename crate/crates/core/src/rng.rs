//! Seeded random streams.
//!
//! Every stochastic routine in the crate draws from xoshiro256++ seeded through
//! SplitMix64 (`rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64`). Independent
//! replicates (bootstrap draws, per-grid-point tests) use [`stream`], which mixes
//! the replicate id into the seed so results never depend on evaluation order.
//! Uniform `f64` draws use the 53-bit multiply method of `rand`; normals use the
//! ziggurat sampler of `rand_distr::StandardNormal`.

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256PlusPlus as Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derived seed for replicate `id` under a master `seed`.
pub fn mix(seed: u64, id: u64) -> u64 {
    splitmix64(seed ^ splitmix64(id.wrapping_mul(GOLDEN).wrapping_add(1)))
}

/// Independent generator for replicate `id` under a master `seed`.
pub fn stream(seed: u64, id: u64) -> Rng {
    Rng::seed_from_u64(mix(seed, id))
}
