//! Seeded, splittable random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit `seed` and selecting
//! the ChaCha stream `stream_id`. ChaCha is counter based, so a given
//! `(seed, stream_id)` pair produces the same sequence on every platform, and
//! distinct stream ids never overlap. Child streams are derived by mixing a
//! key into the parent stream id with SplitMix64.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream under the same seed whose id is a deterministic
    /// function of this stream's id and `key`. The parent's position is not
    /// consulted, so derivation is order independent.
    pub fn derive(&self, key: u64) -> Self {
        Self::new(self.seed, splitmix64(self.stream_id ^ splitmix64(key)))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
