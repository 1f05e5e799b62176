//! Seeded random streams.
//!
//! Every replicate of an experiment owns a ChaCha8 stream derived from the
//! root seed by `stream(root, index)`: the ChaCha key is expanded from `root`
//! with `seed_from_u64` and `index` selects the 64-bit stream id. Streams for
//! different indices never overlap, so replicates can run on any number of
//! threads and still produce identical results.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Where a stream started: enough to replay it exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub root: u64,
    pub stream: u64,
    /// ChaCha word position at the time the record was taken.
    pub word_pos: u128,
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    root: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(root: u64, stream: u64) -> RandomStream {
        let mut rng = ChaCha8Rng::seed_from_u64(root);
        rng.set_stream(stream);
        RandomStream { root, stream, rng }
    }

    pub fn from_record(record: SeedRecord) -> RandomStream {
        let mut s = RandomStream::new(record.root, record.stream);
        s.rng.set_word_pos(record.word_pos);
        s
    }

    pub fn record(&self) -> SeedRecord {
        SeedRecord { root: self.root, stream: self.stream, word_pos: self.rng.get_word_pos() }
    }

    /// A child stream keyed by a value drawn from this one.
    pub fn split(&mut self) -> RandomStream {
        let root = self.rng.next_u64();
        RandomStream::new(root, self.stream)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn stream(root: u64, index: u64) -> RandomStream {
    RandomStream::new(root, index)
}

/// Runs `f` for replicates `0..n`, each with its own stream, in parallel.
/// The output is ordered by replicate index.
pub fn par_replicates<T, F>(root: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut RandomStream) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = stream(root, i as u64);
            f(i, &mut s)
        })
        .collect()
}

/// Uniform draw in the open interval `(0, 1)`.
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if u > 0.0 {
            return u;
        }
    }
}
