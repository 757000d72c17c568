use std::io::Write;
use std::ops::Range;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, TrainConfig};
use crate::error::{Error, Result};
use crate::nam::SubnetSpec;
use crate::rem::CaseControlDataset;
use crate::rng::{derive_seed, stream_rng};

const FOLD_TAG: u64 = 0xCF;

/// Contiguous blocks covering `0..n`; the first `n % k` blocks get one extra.
pub fn fold_ranges(n: usize, k: usize) -> Vec<Range<usize>> {
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCellReport {
    pub arch: String,
    pub dropout: f64,
    pub fold_losses: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub cells: Vec<CvCellReport>,
}

impl CvReport {
    /// Cell indices by increasing mean validation loss.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.cells.len()).collect();
        idx.sort_by(|&a, &b| self.cells[a].mean.total_cmp(&self.cells[b].mean));
        idx
    }

    pub fn best(&self) -> &CvCellReport {
        &self.cells[self.ranking()[0]]
    }

    /// CSV `arch,dropout,fold,val_loss`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["arch", "dropout", "fold", "val_loss"])?;
        for c in &self.cells {
            for (f, l) in c.fold_losses.iter().enumerate() {
                wtr.write_record([c.arch.clone(), c.dropout.to_string(), f.to_string(), l.to_string()])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<cv csv>", e))?;
        Ok(())
    }
}

/// k-fold cross-validation of every architecture in `grid`. Folds are
/// contiguous blocks of one seeded shuffle of the pairs; each (cell, fold)
/// trains on the other k-1 folds and reports the held-out mean pair loss.
pub fn k_fold_cv(
    dataset: &CaseControlDataset,
    grid: &[SubnetSpec],
    k: usize,
    config: &TrainConfig,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::config("cross-validation grid is empty"));
    }
    if k < 2 {
        return Err(Error::config("need at least 2 folds"));
    }
    if dataset.len() < k {
        return Err(Error::config(format!(
            "{} pairs cannot fill {k} folds",
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut stream_rng(derive_seed(config.seed, FOLD_TAG), 0));
    let folds = fold_ranges(dataset.len(), k);

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..k).map(move |f| (c, f)))
        .collect();
    let losses = jobs
        .par_iter()
        .map(|&(c, f)| {
            let held = &order[folds[f].clone()];
            let kept: Vec<usize> = order[..folds[f].start]
                .iter()
                .chain(&order[folds[f].end..])
                .copied()
                .collect();
            let cfg = TrainConfig {
                spec: grid[c].clone(),
                per_covariate: None,
                ..config.clone()
            };
            let fit = train(&dataset.select(&kept), &cfg)?;
            fit.model.mean_loss(dataset.select(held).pairs())
        })
        .collect::<Result<Vec<f64>>>()?;

    let cells = grid
        .iter()
        .enumerate()
        .map(|(c, spec)| {
            let fold_losses = losses[c * k..(c + 1) * k].to_vec();
            let mean = fold_losses.iter().sum::<f64>() / k as f64;
            let var = fold_losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            CvCellReport {
                arch: spec.arch_label(),
                dropout: spec.dropout,
                fold_losses,
                mean,
                sd: var.sqrt(),
            }
        })
        .collect();
    Ok(CvReport { k, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rem::CaseControlPair;

    #[test]
    fn split_arithmetic() {
        assert_eq!(fold_ranges(10, 2), vec![0..5, 5..10]);
        assert_eq!(fold_ranges(11, 3), vec![0..4, 4..8, 8..11]);
    }

    #[test]
    fn folds_partition() {
        for n in [7, 10, 33] {
            for k in 2..=n.min(6) {
                let f = fold_ranges(n, k);
                assert_eq!(f.len(), k);
                assert_eq!(f[0].start, 0);
                assert_eq!(f[k - 1].end, n);
                assert!(f.windows(2).all(|w| w[0].end == w[1].start));
            }
        }
    }

    #[test]
    fn single_cell_has_k_losses() {
        let pairs = (0..10)
            .map(|i| CaseControlPair {
                event_index: i,
                case: vec![i as f64 / 10.0],
                control: vec![0.5],
                dyads: None,
            })
            .collect();
        let ds = CaseControlDataset::new(1, pairs).unwrap();
        let spec = SubnetSpec::new(vec![2], 0.0).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 4,
            ..TrainConfig::new(spec.clone())
        };
        let rep = k_fold_cv(&ds, std::slice::from_ref(&spec), 2, &cfg).unwrap();
        assert_eq!(rep.cells.len(), 1);
        assert_eq!(rep.cells[0].fold_losses.len(), 2);
        let mut out = Vec::new();
        rep.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("arch,dropout,fold,val_loss\n2,0,0,"));
        assert!(k_fold_cv(&ds, &[], 2, &cfg).is_err());
        assert!(k_fold_cv(&ds, std::slice::from_ref(&spec), 1, &cfg).is_err());
        assert!(k_fold_cv(&ds, &[spec], 11, &cfg).is_err());
    }
}
