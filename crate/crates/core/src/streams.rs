//! Deterministic random substreams.
//!
//! Every random draw in a Monte-Carlo run comes from a ChaCha stream keyed by
//! the master seed and a structured position (process, realization, block,
//! purpose). Work units can therefore run in any order on any number of
//! threads and still see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for; keeps e.g. noise and resampling draws apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Trajectory = 1,
    Noise = 2,
    FilterOneBit = 3,
    FilterIdeal = 4,
    Test = 0xff,
}

/// Position of a substream inside a Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamPosition {
    pub process: u64,
    pub realization: u64,
    pub block: u64,
    pub purpose: Purpose,
}

impl StreamPosition {
    pub fn new(purpose: Purpose, process: u64, realization: u64, block: u64) -> Self {
        StreamPosition {
            process,
            realization,
            block,
            purpose,
        }
    }

    fn stream_id(&self) -> u64 {
        let mut h = splitmix64(self.purpose as u64);
        h = splitmix64(h ^ self.process);
        h = splitmix64(h ^ self.realization);
        splitmix64(h ^ self.block)
    }
}

/// Seeded source of substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFactory {
    master_seed: u64,
}

impl StreamFactory {
    pub fn new(master_seed: u64) -> Self {
        StreamFactory { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn rng(&self, position: StreamPosition) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(position.stream_id());
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
