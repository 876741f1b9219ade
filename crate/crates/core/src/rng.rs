//! Counter-based Gaussian noise.
//!
//! Every Brownian increment is a pure function of `(seed, trajectory, step)`.
//! The generator is Philox4x32-10: the key is the 64-bit seed and the 128-bit
//! counter packs `(block, step, trajectory)`, so no generator state is shared
//! between trajectories and parallel evaluation order cannot change a draw.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32-10 block.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(PHILOX_W0);
            key[1] = key[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A random stream positioned at one `(trajectory, step)` cell.
///
/// Implements [`RngCore`] so any `rand_distr` distribution can draw from it.
#[derive(Debug, Clone)]
pub struct CellStream {
    key: [u32; 2],
    ctr: [u32; 4],
    buf: [u32; 4],
    used: usize,
}

impl CellStream {
    pub fn new(seed: u64, trajectory: u64, step: u64) -> Self {
        assert!(step <= u32::MAX as u64, "step index {step} exceeds the counter layout");
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            ctr: [0, step as u32, trajectory as u32, (trajectory >> 32) as u32],
            buf: [0; 4],
            used: 4,
        }
    }

    fn refill(&mut self) {
        self.buf = philox4x32_10(self.ctr, self.key);
        self.ctr[0] = self.ctr[0].wrapping_add(1);
        self.used = 0;
    }
}

impl RngCore for CellStream {
    fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.refill();
        }
        let v = self.buf[self.used];
        self.used += 1;
        v
    }

    fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        (hi << 32) | lo
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let bytes = self.next_u32().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Noise source for a family of trajectories in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub seed: u64,
    pub dim: usize,
}

impl NoiseSpec {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim >= 1, "noise dimension must be at least 1");
        Self { seed, dim }
    }

    /// An independent family of streams, e.g. for a second ensemble that must
    /// not share increments with the first.
    pub fn derive(&self, tag: u64) -> Self {
        Self { seed: splitmix64(self.seed ^ splitmix64(tag)), dim: self.dim }
    }

    /// Standard normal draws for `(trajectory, step)`, written into `out`.
    /// `out.len()` need not equal `dim`; callers sampling initial laws use it
    /// with other lengths.
    #[inline]
    pub fn fill_standard_normal(&self, trajectory: u64, step: u64, out: &mut [f64]) {
        let mut rng = CellStream::new(self.seed, trajectory, step);
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }
}

/// `dim` independent N(0,1) draws for `(trajectory, step)`; the caller scales by √Δt.
pub fn gaussian_increment(noise: &NoiseSpec, trajectory: u64, step: u64) -> Vec<f64> {
    let mut out = vec![0.0; noise.dim];
    noise.fill_standard_normal(trajectory, step, &mut out);
    out
}
