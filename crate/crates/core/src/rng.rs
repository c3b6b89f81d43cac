//! Counter-based random number generation.
//!
//! Sampling is keyed by an explicit `(seed, stream)` pair and driven by a
//! block counter, so any draw is reproducible bit-for-bit regardless of what
//! other streams were consumed and in what order. This is what makes sweep
//! points independently re-runnable: layer `l` of width `m` under seed `s` is
//! always the same matrix, whether it is drawn alone or in the middle of a
//! full sweep.
//!
//! The generator is the 10-round Philox 2x64 bijection; Gaussians come from
//! Box–Muller, which is exact (no tail cutoff) and platform-independent.

use crate::math;
use alloc::vec::Vec;

const PHILOX_M: u64 = 0xD2B7_4407_B1CE_6E93;
const PHILOX_W: u64 = 0x9E37_79B9_7F4A_7C15;
const ROUNDS: usize = 10;

#[inline(always)]
fn philox2x64(key: u64, ctr: [u64; 2]) -> [u64; 2] {
    let mut k = key;
    let (mut x0, mut x1) = (ctr[0], ctr[1]);
    for _ in 0..ROUNDS {
        let prod = (x0 as u128).wrapping_mul(PHILOX_M as u128);
        let hi = (prod >> 64) as u64;
        let lo = prod as u64;
        x0 = hi ^ k ^ x1;
        x1 = lo;
        k = k.wrapping_add(PHILOX_W);
    }
    [x0, x1]
}

/// SplitMix64 finalizer, used to derive child stream identifiers.
#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child stream id from a parent stream and a tag. Collision-free in
/// practice for the handful of tags used per parent.
pub fn derive_stream(parent: u64, tag: u64) -> u64 {
    mix64(parent ^ tag.wrapping_mul(0xA24B_AED4_963E_E407))
}

/// Deterministic counter-based RNG over a single `(seed, stream)` pair.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    stream: u64,
    counter: u64,
    spare: Option<u64>,
    spare_normal: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng { seed, stream, counter: 0, spare: None, spare_normal: None }
    }

    /// Child generator for a sub-task of this stream.
    pub fn child(&self, tag: u64) -> Self {
        CounterRng::new(self.seed, derive_stream(self.stream, tag))
    }

    pub fn next_u64(&mut self) -> u64 {
        if let Some(w) = self.spare.take() {
            return w;
        }
        let out = philox2x64(self.seed, [self.counter, self.stream]);
        self.counter = self.counter.wrapping_add(1);
        self.spare = Some(out[1]);
        out[0]
    }

    /// Uniform in the half-open interval `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Modulo bias is negligible for the small n used here.
        self.next_u64() % n
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = math::sqrt(-2.0 * math::ln(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(r * math::sin(theta));
        r * math::cos(theta)
    }

    /// Fill `out` with i.i.d. `N(0, std^2)` samples.
    pub fn fill_normal(&mut self, out: &mut [f64], std: f64) {
        for v in out.iter_mut() {
            *v = std * self.normal();
        }
    }

    /// A random sign in `{-1.0, +1.0}`.
    pub fn sign(&mut self) -> f64 {
        if self.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// A uniformly random unit vector of length `dim`.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        let mut v = alloc::vec![0.0; dim];
        loop {
            self.fill_normal(&mut v, 1.0);
            let n = crate::linalg::norm2(&v);
            if n > 1e-300 {
                for x in v.iter_mut() {
                    *x /= n;
                }
                return v;
            }
        }
    }
}
