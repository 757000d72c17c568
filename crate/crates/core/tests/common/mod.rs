#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson statistic and its 1% critical value.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    let stat = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let crit = ChiSquared::new((observed.len() - 1) as f64).unwrap().inverse_cdf(0.99);
    (stat, crit)
}
