//! Seed handling.
//!
//! Every random quantity is drawn from a ChaCha8 generator keyed by the run
//! seed and a fixed [`Stream`] id, so the hidden-weight draw, the mini-batch
//! sequence and the returned-step choice never share state. Two trainers
//! started from the same seed therefore see the same Gaussian matrix, the
//! same batches and the same returned step.
//!
//! Independent replicates use [`derive_seed`] (SplitMix64 over the base seed
//! and the replicate index), which gives the same sub-seeds whether the
//! replicates run serially or on a thread pool.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Gaussian weight matrix / feature directions.
    Gaussian = 1,
    /// Mini-batch sampling.
    Batches = 2,
    /// Uniform choice of the returned iterate.
    Pick = 3,
    /// Dataset points.
    Points = 4,
    /// Dataset labels.
    Labels = 5,
    /// Held-out probe / test points.
    Probe = 6,
    /// Power-iteration start vector.
    Start = 7,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 mix of a base seed and a replicate index.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Fills `out` with a uniform point of the unit sphere (normalized Gaussian).
pub fn sphere_point(rng: &mut impl Rng, out: &mut [f64]) {
    loop {
        let mut norm_sq = 0.0;
        for v in out.iter_mut() {
            *v = gaussian(rng);
            norm_sq += *v * *v;
        }
        if norm_sq > 1e-300 {
            let inv = 1.0 / norm_sq.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// `rows × cols` row-major matrix of i.i.d. standard Gaussians, drawn from
/// the [`Stream::Gaussian`] stream of `seed`.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Gaussian);
    (0..rows * cols).map(|_| gaussian(&mut rng)).collect()
}

/// Step index in `1..=steps`, uniform, from the [`Stream::Pick`] stream.
///
/// The index is `floor(u * steps) + 1` for a single uniform `u`, so runs that
/// differ only in `steps` return proportionally placed iterates.
pub fn pick_step(seed: u64, steps: usize) -> usize {
    let u: f64 = stream_rng(seed, Stream::Pick).random();
    ((u * steps as f64) as usize).min(steps - 1) + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: Vec<u64> = (0..4).map(|_| stream_rng(3, Stream::Batches).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut x = stream_rng(3, Stream::Batches);
        let mut y = stream_rng(3, Stream::Pick);
        assert_ne!(x.random::<u64>(), y.random::<u64>());
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn pick_step_in_range() {
        for seed in 0..200 {
            let t = pick_step(seed, 7);
            assert!((1..=7).contains(&t));
        }
        assert_eq!(pick_step(5, 1), 1);
    }

    #[test]
    fn sphere_points_are_unit() {
        let mut rng = stream_rng(1, Stream::Points);
        let mut x = [0.0; 5];
        for _ in 0..100 {
            sphere_point(&mut rng, &mut x);
            let n: f64 = x.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
