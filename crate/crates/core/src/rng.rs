//! Seeded randomness shared by every subsystem.
//!
//! All random draws go through ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with
//! `seed_from_u64` and split into independent streams with `set_stream`. Unit
//! draws and bounded integers are computed here from raw `next_u64` output so
//! the exact sequence does not depend on `rand`'s distribution internals:
//!
//! * `below(n)`: rejection sampling. Let `t = 2^64 mod n`; draw `x` until
//!   `x >= t` and return `x mod n`.
//! * `unit()`: `(next_u64 >> 11) * 2^-53`, uniform on `[0, 1)`.
//! * `sample_indices(n, count)`: partial Fisher-Yates over `[1, 2, ..., n]`.
//!   For `i` in `0..count`, swap slot `i` with slot `i + below(n - i)`; the
//!   first `count` slots, sorted ascending, are the sample.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids reserved per subsystem so one `--seed` drives the whole pipeline.
pub mod streams {
    pub const CONDENSE: u64 = 0x636f_6e64;
    pub const PERTURB: u64 = 0x7065_7274;
    pub const JITTER: u64 = 0x6a69_7474;
    pub const VALIDATE: u64 = 0x7661_6c69;
}

#[derive(Debug, Clone)]
pub struct SeededStream {
    inner: ChaCha8Rng,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % n;
            }
        }
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `count` distinct indices from `1..=n`, ascending.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n, "cannot sample {count} of {n}");
        let mut slots: Vec<usize> = (1..=n).collect();
        for i in 0..count {
            let j = i + self.below((n - i) as u64) as usize;
            slots.swap(i, j);
        }
        slots.truncate(count);
        slots.sort_unstable();
        slots
    }

    pub(crate) fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

/// Derive a child seed for item `index` of subsystem `stream`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut s = SeededStream::with_stream(seed, stream);
    // Each index owns one u64, i.e. two 32-bit words of the stream.
    s.inner.set_word_pos(u128::from(index) * 2);
    s.next_u64()
}
