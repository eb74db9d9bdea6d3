//! Seeded random streams.
//!
//! Every randomized operation takes an explicit `u64` seed and builds its own
//! ChaCha stream from it, so results are reproducible across runs and
//! platforms.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed, an index and a string tag.
pub fn derive_seed(parent: u64, index: u64, tag: &str) -> u64 {
    let mut h = mix64(parent ^ 0x6A09_E667_F3BC_C908);
    h = mix64(h ^ index);
    // FNV-1a over the tag bytes, folded into the running hash
    let mut t: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.bytes() {
        t ^= u64::from(b);
        t = t.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(h ^ t)
}

pub fn standard_normal(rng: &mut SeededRng) -> f64 {
    StandardNormal.sample(rng)
}

/// An `nrows x ncols` matrix of i.i.d. standard normals, filled row by row.
pub fn gaussian_matrix(rng: &mut SeededRng, nrows: usize, ncols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(nrows, ncols);
    for i in 0..nrows {
        for j in 0..ncols {
            m[(i, j)] = standard_normal(rng);
        }
    }
    m
}
