//! Seedable, splittable random streams.
//!
//! Every stochastic consumer (replicate, block, rollout, particle filter)
//! receives its own stream derived from a root seed and a path of integer
//! tags. Derivation is a pure function of the path, so results do not
//! depend on evaluation order or thread schedule.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The concrete generator used throughout the crate.
pub type Stream = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of tags into a new seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

/// A node in the stream-derivation tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Seeder {
    seed: u64,
}

impl Seeder {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child node addressed by `tags`.
    pub fn child(&self, tags: &[u64]) -> Seeder {
        Seeder { seed: derive_seed(self.seed, tags) }
    }

    /// Independent stream addressed by `tags`.
    pub fn stream(&self, tags: &[u64]) -> Stream {
        Stream::seed_from_u64(derive_seed(self.seed, tags))
    }

    /// Takes a fresh child seeder from an existing stream.
    pub fn from_rng<R: RngCore + ?Sized>(rng: &mut R) -> Seeder {
        Seeder { seed: rng.next_u64() }
    }
}

/// Stable tags for the purposes streams are drawn for.
pub mod tag {
    pub const WORLD: u64 = 1;
    pub const GENERATOR: u64 = 2;
    pub const ASSIMILATE: u64 = 3;
    pub const PLAN: u64 = 4;
    pub const WARM_START: u64 = 5;
    pub const POLICY: u64 = 6;
    pub const WHATIF: u64 = 7;
    pub const REPLAY: u64 = 8;
}
