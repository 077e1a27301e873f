//! Seeded random source.
//!
//! ChaCha8 is a fixed, portable algorithm, so a seed produces the same draws on
//! every platform. All derived quantities (floats, ranges) are computed here
//! with plain integer arithmetic so no library sampling code can change them.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream tags XOR-ed into the scenario seed, one per stochastic component.
pub mod stream {
    pub const PLACEMENT: u64 = 0x504c_4143_454d_454e;
    pub const MOBILITY: u64 = 0x4d4f_4249_4c49_5459;
    pub const TRAFFIC: u64 = 0x5452_4146_4649_4300;
    pub const RADIO_LOSS: u64 = 0x5241_4449_4f4c_4f53;
}

#[derive(Clone, Debug)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent sub-stream for one component.
    pub fn derive(seed: u64, tag: u64) -> Self {
        SimRng::new(seed ^ tag)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]`; returns `lo` when the interval is degenerate.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `[0, n)` using the widening-multiply reduction.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        self.unit() < p
    }
}
