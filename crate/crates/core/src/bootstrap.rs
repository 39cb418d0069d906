//! Block bootstrap over precomputed per-block sufficient statistics.
//!
//! A dependent series is cut into contiguous blocks; each block contributes a
//! fixed-length vector of sums (for instance `ΣI`, `ΣI(t)I(t+τ)`, pair counts).
//! A replicate draws blocks with replacement, adds their vectors and evaluates
//! the estimator on the total. Replicate `r` draws from
//! `rng_for(seed, BOOTSTRAP, r)`.

use rand::Rng as _;
use rayon::prelude::*;

use crate::numeric::mean_std;
use crate::seeding::{rng_for, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapConfig {
    /// Target number of blocks.
    pub blocks: usize,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            blocks: 100,
            resamples: 200,
            seed: 0x6232_5f62_6f6f_7473,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapSummary {
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += v;
    }
}

/// Component-wise sum of all block vectors.
pub fn total(blocks: &[Vec<f64>]) -> Vec<f64> {
    let width = blocks.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; width];
    for b in blocks {
        add_into(&mut acc, b);
    }
    acc
}

/// Mean and standard deviation of the estimator over bootstrap replicates.
pub fn block_bootstrap<F>(
    blocks: &[Vec<f64>],
    resamples: usize,
    seed: u64,
    estimator: F,
) -> BootstrapSummary
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let nb = blocks.len();
    let width = blocks.first().map_or(0, Vec::len);
    let reps: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, stream::BOOTSTRAP, r as u64);
            let mut acc = vec![0.0; width];
            for _ in 0..nb {
                add_into(&mut acc, &blocks[rng.random_range(0..nb)]);
            }
            estimator(&acc)
        })
        .collect();
    let outputs = reps.first().map_or(0, Vec::len);
    let mut means = Vec::with_capacity(outputs);
    let mut std_errors = Vec::with_capacity(outputs);
    for j in 0..outputs {
        let column: Vec<f64> = reps.iter().map(|r| r[j]).filter(|v| v.is_finite()).collect();
        let (m, s) = mean_std(&column);
        means.push(m);
        std_errors.push(s);
    }
    BootstrapSummary { means, std_errors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn std_error_of_mean_for_iid_blocks() {
        // 400 blocks of 50 iid N(0,1) draws; SE of the mean is 1/sqrt(20000).
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let blocks: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let s: f64 = (0..50).map(|_| -> f64 { StandardNormal.sample(&mut rng) }).sum::<f64>();
                vec![s, 50.0]
            })
            .collect();
        let out = block_bootstrap(&blocks, 400, 1, |t| vec![t[0] / t[1]]);
        let expected = 1.0 / (20000f64).sqrt();
        assert!((out.std_errors[0] / expected - 1.0).abs() < 0.15);
    }

    #[test]
    fn constant_blocks_have_zero_spread() {
        let blocks = vec![vec![2.0, 1.0]; 10];
        let out = block_bootstrap(&blocks, 50, 1, |t| vec![t[0] / t[1]]);
        assert_eq!(out.std_errors[0], 0.0);
        assert_eq!(out.means[0], 2.0);
    }
}
