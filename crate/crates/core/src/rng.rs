//! Counter-keyed random substreams.
//!
//! Every random draw in the library comes from a generator derived from a
//! structured key, never from a shared generator. Work items can then be
//! scheduled on any number of threads and still see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// A position in the key tree. Children are derived with [`StreamKey::child`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(splitmix(seed))
    }

    pub fn child(self, index: u64) -> Self {
        StreamKey(splitmix(self.0 ^ splitmix(index.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    /// Child keyed by a label, e.g. a method or scenario name.
    pub fn named(self, label: &str) -> Self {
        // FNV-1a keeps labels stable across builds and platforms.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        self.child(h)
    }

    pub fn path(self, indices: &[u64]) -> Self {
        indices.iter().fold(self, |k, &i| k.child(i))
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}
