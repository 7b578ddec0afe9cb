//! Seed derivation and low-discrepancy sequences.
//!
//! Every stochastic stage draws from its own generator, derived from the run
//! seed and a fixed stage label, so re-running a single stage reproduces the
//! same stream regardless of what ran before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a stage seed from the run seed and a stage label (FNV-1a over the label).
pub fn stage_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

/// Derives a seed for the `index`-th draw within a stage.
pub fn indexed_seed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(stage_seed(seed, label) ^ splitmix64(index.wrapping_add(1)))
}

pub fn stage_rng(seed: u64, label: &str) -> StageRng {
    StageRng::seed_from_u64(stage_seed(seed, label))
}

pub fn indexed_rng(seed: u64, label: &str, index: u64) -> StageRng {
    StageRng::seed_from_u64(indexed_seed(seed, label, index))
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// The `index`-th point of the Halton sequence in `dim` dimensions (index 0 is the origin).
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton supports up to {} dimensions", PRIMES.len());
    PRIMES[..dim]
        .iter()
        .map(|&b| radical_inverse(index, b))
        .collect()
}

/// Halton point with a Cranley-Patterson rotation: each coordinate shifted modulo 1.
pub fn shifted_halton(index: u64, shift: &[f64]) -> Vec<f64> {
    halton(index, shift.len())
        .into_iter()
        .zip(shift)
        .map(|(h, s)| (h + s).fract())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base_two_and_three() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(2, 2), vec![0.25, 2.0 / 3.0]);
        assert_eq!(halton(3, 1), vec![0.75]);
    }

    #[test]
    fn stage_seeds_differ_by_label() {
        assert_ne!(stage_seed(42, "umap"), stage_seed(42, "kmeans"));
        assert_eq!(stage_seed(42, "umap"), stage_seed(42, "umap"));
        assert_ne!(indexed_seed(1, "x", 0), indexed_seed(1, "x", 1));
    }
}
