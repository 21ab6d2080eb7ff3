//! Portable counter-based random number generation.
//!
//! Every random quantity produced by this crate is a pure function of a
//! 64-bit seed and a 64-bit counter. The raw generator is the SplitMix64
//! stream evaluated at an arbitrary index:
//!
//! ```text
//! raw(seed, i) = mix64(seed + (i + 1) * 0x9E3779B97F4A7C15)   (wrapping)
//! mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!           z ^= z >> 27; z *= 0x94D049BB133111EB;
//!           z ^= z >> 31
//! ```
//!
//! Float mappings, fixed once for all modules:
//! - `unit`: top 53 bits of `raw` divided by 2^53, giving f64 in `[0, 1)`.
//! - uniform over `[-1, 1)`: `2 * unit - 1`.
//! - gaussian(0, sigma): Box-Muller over the counter pair `(2i, 2i+1)`:
//!   `u1 = (top53(raw(2i)) + 1) / 2^53` in `(0, 1]`,
//!   `u2 = top53(raw(2i+1)) / 2^53` in `[0, 1)`,
//!   `z = sigma * sqrt(-2 ln u1) * cos(2 pi u2)`, rounded to f32 once.
//!
//! Because each element depends only on (seed, element index), fills are
//! reproducible across runs and independent of iteration strategy.

const GOLDEN: u64 = 0x9E3779B9_7F4A7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D_1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB_133111EB);
    z ^ (z >> 31)
}

/// Raw 64-bit output at stream position `counter`.
#[inline]
pub fn raw(seed: u64, counter: u64) -> u64 {
    mix64(seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// f64 in `[0, 1)` at stream position `counter`.
#[inline]
pub fn unit(seed: u64, counter: u64) -> f64 {
    (raw(seed, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// f64 uniform over `[-1, 1)` at stream position `counter`.
#[inline]
pub fn uniform_sym(seed: u64, counter: u64) -> f64 {
    2.0 * unit(seed, counter) - 1.0
}

/// Standard normal draw for element `index`, consuming counters
/// `2*index` and `2*index + 1`.
#[inline]
pub fn gaussian(seed: u64, index: u64) -> f64 {
    let u1 = ((raw(seed, 2 * index) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (raw(seed, 2 * index + 1) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Derives an independent sub-seed from a seed and a tag (sample index,
/// block id, label hash). Distinct tags give unrelated streams.
#[inline]
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}

/// FNV-1a 64-bit hash of a byte string; used to key label strings so the
/// mapping is stable across platforms and process runs.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF29CE4_84222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01B3);
    }
    h
}

/// Sequential convenience wrapper over the counter stream.
#[derive(Debug, Clone)]
pub struct Stream {
    seed: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { seed, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = raw(self.seed, self.counter);
        self.counter += 1;
        v
    }

    /// f64 in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        let v = unit(self.seed, self.counter);
        self.counter += 1;
        v
    }

    /// Standard normal; consumes two counter positions.
    pub fn next_gaussian(&mut self) -> f64 {
        // Keep pairing identical to the stateless mapping: round the
        // counter up to even so (2i, 2i+1) alignment is preserved.
        let index = self.counter.div_ceil(2);
        let v = gaussian(self.seed, index);
        self.counter = 2 * index + 2;
        v
    }

    /// Uniform integer in `[0, n)` by rejection-free scaling; n must be > 0.
    /// Fine for shuffles at dataset scale (bias is ~n / 2^53).
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let v = (self.next_unit() * n as f64) as usize;
        v.min(n - 1)
    }

    /// Fisher-Yates shuffle with a deterministic draw order.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }
}
