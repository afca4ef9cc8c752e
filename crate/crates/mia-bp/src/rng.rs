//! Counter-based deterministic RNG with named substreams.
//!
//! Every random draw in a simulation is addressed, not sequenced: the value
//! for (stream, slot) is a pure function of the master seed, a domain tag, the
//! stream coordinates (for arrivals: node and commodity), and the slot
//! counter. Draws therefore do not depend on evaluation order, which is what
//! makes traces bitwise reproducible and sweep parallelism safe.
//!
//! The generator is the SplitMix64 finalizer (Steele/Lea/Flood's fmix
//! constants) applied to `key + GOLDEN * counter`: a bijective avalanche mix
//! whose statistical quality is ample for Bernoulli/batch arrival sampling and
//! categorical action sampling. It is not cryptographic and is not meant to
//! be.

use crate::rational::Rat;
use num::bigint::BigInt;
use num::{One, ToPrimitive, Zero};

/// 2^64 / golden ratio; the Weyl increment from SplitMix64.
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Domain tags keep unrelated substreams out of each other's counter space.
pub mod domain {
    pub const ARRIVALS: u64 = 0x41;
    pub const PATTERN: u64 = 0x50;
    pub const NODE_CHOICE: u64 = 0x4e;
    pub const SEED_DERIVE: u64 = 0x53;
}

/// SplitMix64 output finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A substream key: master seed mixed with a domain tag and two coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey(u64);

pub fn stream(seed: u64, domain: u64, a: u64, b: u64) -> StreamKey {
    let coord = mix64(a.wrapping_mul(GOLDEN) ^ b.rotate_left(32));
    StreamKey(mix64(seed ^ mix64(domain.wrapping_mul(GOLDEN))) ^ coord)
}

/// The draw for `counter` on this stream, uniform over `u64`.
#[inline]
pub fn draw(key: StreamKey, counter: u64) -> u64 {
    mix64(key.0.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Derives the seed for replicate `index` of a sweep from the master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    draw(stream(master, domain::SEED_DERIVE, index, 0), index)
}

/// Exact-threshold Bernoulli/categorical support: `p` as a `u64` scale where
/// probability = threshold / 2^64, rounded down. The rounding bias is below
/// 2^-64 per draw.
fn threshold_u64(p: &Rat) -> u64 {
    if p >= &Rat::one() {
        return u64::MAX;
    }
    if p <= &Rat::zero() {
        return 0;
    }
    let scaled = (p * Rat::from(BigInt::from(1u128 << 64) * BigInt::from(1))).floor();
    scaled.numer().to_u64().unwrap_or(u64::MAX)
}

/// Bernoulli sampler with a precomputed threshold.
#[derive(Debug, Clone, Copy)]
pub struct Bernoulli {
    always: bool,
    threshold: u64,
}

impl Bernoulli {
    pub fn new(p: &Rat) -> Self {
        Bernoulli {
            always: p >= &Rat::one(),
            threshold: threshold_u64(p),
        }
    }

    #[inline]
    pub fn sample(&self, key: StreamKey, counter: u64) -> bool {
        self.always || draw(key, counter) < self.threshold
    }
}

/// Categorical sampler over weights with total mass at most one. Returns
/// `None` for the residual (idle) mass. When the weights sum to exactly one
/// the final category absorbs the rounding tail so no idle outcome exists.
#[derive(Debug, Clone)]
pub struct Categorical {
    cumulative: Vec<u64>,
    absorb_tail: bool,
}

impl Categorical {
    /// `weights` must be non-negative with sum <= 1; panics otherwise.
    pub fn new(weights: &[Rat]) -> Self {
        let mut total = Rat::zero();
        let mut cumulative = Vec::with_capacity(weights.len());
        for w in weights {
            assert!(w >= &Rat::zero(), "negative categorical weight");
            total += w;
            cumulative.push(threshold_u64(&total));
        }
        assert!(total <= Rat::one(), "categorical weights exceed one");
        Categorical {
            cumulative,
            absorb_tail: total == Rat::one(),
        }
    }

    #[inline]
    pub fn sample(&self, key: StreamKey, counter: u64) -> Option<usize> {
        let u = draw(key, counter);
        let n = self.cumulative.len();
        for (i, bound) in self.cumulative.iter().enumerate() {
            if i + 1 == n {
                break;
            }
            if u < *bound {
                return Some(i);
            }
        }
        match self.cumulative.last() {
            Some(last) if self.absorb_tail || u < *last => Some(n - 1),
            _ => None,
        }
    }
}
