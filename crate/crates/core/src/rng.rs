//! Seeded random streams and circular-symmetric complex Gaussian sampling.
//!
//! Every random draw in the crate goes through an explicit [`Stream`], so a
//! run is a pure function of its seeds. Per-trial streams are derived with a
//! splitmix64 mix of `(master_seed, tag, grid index, trial index)`, which makes
//! results independent of the order in which parallel trials complete.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMat, CVec, C64};

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed for one trial: `splitmix(splitmix(splitmix(master ^ fnv(tag)) ^ index) ^ trial)`.
pub fn derive_seed(master_seed: u64, tag: &str, index: u64, trial: u64) -> u64 {
    let a = splitmix64(master_seed ^ fnv1a(tag));
    let b = splitmix64(a ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ trial.wrapping_mul(0xA076_1D64_78BD_642F))
}

/// One CN(0,1) draw: `(g1 + i g2) / sqrt(2)` with independent standard normals.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| complex_normal(rng)))
}

/// Entries are drawn in row-major order.
pub fn complex_normal_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}
