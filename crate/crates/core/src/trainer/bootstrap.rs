use rand::Rng;
use rayon::prelude::*;

use super::{train, TrainConfig, TrainOutput};
use crate::error::{Error, Result};
use crate::rem::CaseControlDataset;
use crate::rng::{derive_seed, stream_rng};

/// n draws with replacement from `0..n`.
pub fn resample_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Trains on the pairs at `indices` with `config` unchanged.
pub fn refit(dataset: &CaseControlDataset, indices: &[usize], config: &TrainConfig) -> Result<TrainOutput> {
    if indices.iter().any(|&i| i >= dataset.len()) {
        return Err(Error::config("resample index out of range"));
    }
    train(&dataset.select(indices), config)
}

/// `b` models, each trained on a with-replacement resample of the pairs.
///
/// Refit `i` draws its resample from stream `i` of `seed` and trains with
/// seed `derive_seed(seed, i)`, so refits can run in any order.
pub fn bootstrap_refits(
    dataset: &CaseControlDataset,
    config: &TrainConfig,
    b: usize,
    seed: u64,
) -> Result<Vec<TrainOutput>> {
    if b == 0 {
        return Err(Error::config("need at least one bootstrap refit"));
    }
    if dataset.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    (0..b)
        .into_par_iter()
        .map(|i| {
            let idx = resample_indices(dataset.len(), &mut stream_rng(seed, i as u64));
            let cfg = TrainConfig {
                seed: derive_seed(seed, i as u64),
                ..config.clone()
            };
            refit(dataset, &idx, &cfg).map_err(|e| Error::Refit {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}
