use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

/// SplitMix64 stream with a documented range reduction.
///
/// `uniform(start, end)` draws 64-bit words and rejects those at or above
/// the largest multiple of `end - start` below 2^64, then returns
/// `start + word % (end - start)`. Both halves are simple enough to
/// reimplement bit-for-bit elsewhere.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: SplitMix64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { inner: SplitMix64::from_seed(seed.to_le_bytes()) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `[start, end)`; `None` for an empty range.
    pub fn uniform(&mut self, start: i64, end: i64) -> Option<i64> {
        if end <= start {
            return None;
        }
        let span = (end as i128 - start as i128) as u128;
        if span > u64::MAX as u128 {
            // Full 64-bit range: every word is acceptable.
            return Some(self.next_u64() as i64);
        }
        let span = span as u64;
        let rem = ((u64::MAX % span) + 1) % span;
        loop {
            let word = self.next_u64();
            if word <= u64::MAX - rem {
                return Some((start as i128 + (word % span) as i128) as i64);
            }
        }
    }
}
