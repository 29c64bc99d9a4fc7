//! Counter-based 64-bit keystream used to expand cipher keys.
//!
//! Output word `t` (t = 1, 2, ...) of the stream seeded with `s` is
//!
//! ```text
//! z = s + t * 0x9E3779B97F4A7C15          (mod 2^64)
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 (mod 2^64)
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB (mod 2^64)
//! z =  z ^ (z >> 31)
//! ```
//!
//! which is the SplitMix64 sequence. Values in `0..m` are drawn by rejection:
//! words `>= floor(2^64 / m) * m` are discarded and the next word is tried,
//! the accepted word is reduced `mod m`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Keystream {
    seed: u64,
    counter: u64,
}

impl Keystream {
    pub fn new(seed: u64) -> Self {
        Keystream { seed, counter: 0 }
    }

    /// Number of words consumed so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform value in `0..m` without modulo bias. `m` must be non-zero.
    pub fn below(&mut self, m: u64) -> u64 {
        assert!(m > 0, "empty range");
        let limit = (u64::MAX / m) * m;
        loop {
            let x = self.next_u64();
            if x < limit {
                return x % m;
            }
        }
    }

    pub fn bit(&mut self) -> bool {
        self.below(2) == 1
    }

    /// Fisher–Yates shuffle of `0..n`, swapping from the top index down.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            p.swap(i, j);
        }
        p
    }
}
