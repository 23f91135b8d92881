//! Deterministic, portable pseudo-random generation.
//!
//! All randomness in this crate (dataset synthesis, parameter
//! initialization) flows through these two generators so that identical
//! seeds produce identical output on every platform:
//!
//! * `SplitMix64` — state advances by the constant `0x9E3779B97F4A7C15`;
//!   output mixing multiplies by `0xBF58476D1CE4E5B9` and
//!   `0x94D049BB133111EB` with shifts 30/27/31. Used for seeding and for
//!   deriving independent per-video streams.
//! * `Xoshiro256PlusPlus` — the xoshiro256++ generator of Blackman and
//!   Vigna: output `rotl(s0 + s3, 23) + s0`, state update via
//!   `t = s1 << 17`, xor cascade, `rotl(s3, 45)`. Seeded from SplitMix64.

/// SplitMix64 stream. Mainly used to expand a single `u64` seed into the
/// 256-bit xoshiro state and into per-video sub-seeds.
#[derive(Debug, Clone, Copy)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Derives an independent sub-seed from a base seed and an index.
/// Each (seed, index) pair maps to a fixed value, so parallel consumers
/// can be handed disjoint streams without sharing generator state.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut sm = SplitMix64::new(seed ^ index.wrapping_mul(0xA076_1D64_78BD_642F));
    sm.next_u64()
}

/// xoshiro256++ generator.
#[derive(Debug, Clone)]
pub struct Xoshiro256PlusPlus {
    s: [u64; 4],
}

fn rotl(x: u64, k: u32) -> u64 {
    x.rotate_left(k)
}

impl Xoshiro256PlusPlus {
    pub fn new(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Self {
            s: [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = rotl(self.s[0].wrapping_add(self.s[3]), 23).wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = rotl(self.s[3], 45);
        result
    }

    /// Uniform double in [0, 1), using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n).
    pub fn next_below(&mut self, n: u64) -> u64 {
        // Modulo bias is irrelevant at the ranges used here (n << 2^64).
        self.next_u64() % n
    }

    /// Standard normal via Box-Muller. Consumes two uniforms per call.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_f64().max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
