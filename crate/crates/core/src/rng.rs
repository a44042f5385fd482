//! Seeded random streams.
//!
//! Every consumer of randomness draws from a ChaCha20 stream keyed by a 64-bit
//! seed and a stream id. ChaCha is counter based, so two stream ids under the
//! same seed never overlap and drawing from one never perturbs another. The
//! sampler relies on this: the direction vectors come from
//! [`Stream::Directions`] and each radial law owns its own stream, so changing
//! the law leaves the directions untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Named sub-streams. The discriminant is the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Directions,
    RadialConstant,
    RadialStudentT,
    RadialLaplace,
    RadialCauchy,
}

impl Stream {
    pub fn id(self) -> u64 {
        match self {
            Stream::Directions => 1,
            Stream::RadialConstant => 2,
            Stream::RadialStudentT => 3,
            Stream::RadialLaplace => 4,
            Stream::RadialCauchy => 5,
        }
    }
}

/// A root seed from which named streams and child seeds are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStreams {
    seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, stream: Stream) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream.id());
        rng
    }

    /// Seed for the `index`-th independent replicate (splitmix64 of seed and index).
    pub fn child(&self, index: u64) -> SeedStreams {
        SeedStreams::new(splitmix64(
            self.seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)),
        ))
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
