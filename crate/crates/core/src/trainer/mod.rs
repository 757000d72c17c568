//! Mini-batch training, cross-validation and bootstrap refits.

mod bootstrap;
mod cv;

use std::io::Write;

use log::debug;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nam::{InputBounds, NamModel, SubnetSpec};
use crate::optim::{AdamConfig, AdamState};
use crate::rem::{CaseControlDataset, CaseControlPair};
use crate::rng::{derive_seed, stream_rng, StreamRng};

pub use bootstrap::{bootstrap_refits, refit, resample_indices};
pub use cv::{fold_ranges, k_fold_cv, CvCellReport, CvReport};

const INIT_TAG: u64 = 1;
const SHUFFLE_TAG: u64 = 2;
const DROPOUT_TAG: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Architecture shared by every subnet unless `per_covariate` is set.
    pub spec: SubnetSpec,
    #[serde(default)]
    pub per_covariate: Option<Vec<SubnetSpec>>,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Stop after this many epochs without a lower training loss.
    #[serde(default)]
    pub patience: Option<usize>,
}

impl TrainConfig {
    pub fn new(spec: SubnetSpec) -> Self {
        TrainConfig {
            spec,
            per_covariate: None,
            batch_size: 256,
            epochs: 20,
            adam: AdamConfig::default(),
            seed: 0,
            patience: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.patience == Some(0) {
            return Err(Error::config("patience must be at least 1"));
        }
        self.spec.validate()?;
        for s in self.per_covariate.iter().flatten() {
            s.validate()?;
        }
        self.adam.validate()
    }

    fn specs(&self, q: usize) -> Result<Vec<SubnetSpec>> {
        match &self.per_covariate {
            Some(v) if v.len() != q => Err(Error::Dimension {
                expected: q,
                got: v.len(),
            }),
            Some(v) => Ok(v.clone()),
            None => Ok(vec![self.spec.clone(); q]),
        }
    }
}

/// Mean pair loss before training and after each epoch (train mode, running mean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub initial: f64,
    pub epochs: Vec<f64>,
}

impl LossTrace {
    pub fn last(&self) -> f64 {
        self.epochs.last().copied().unwrap_or(self.initial)
    }

    /// CSV `epoch,loss`; epoch 0 is the untrained model.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["epoch", "loss"])?;
        wtr.write_record(["0".to_string(), self.initial.to_string()])?;
        for (i, l) in self.epochs.iter().enumerate() {
            wtr.write_record([(i + 1).to_string(), l.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<loss csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: NamModel,
    pub trace: LossTrace,
    pub steps: u64,
}

/// Per-covariate min/max over cases and controls.
pub fn input_bounds(dataset: &CaseControlDataset) -> Vec<InputBounds> {
    let mut b = vec![
        InputBounds {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        };
        dataset.q()
    ];
    for p in dataset.pairs() {
        for x in [&p.case, &p.control] {
            for (bk, &v) in b.iter_mut().zip(x.iter()) {
                bk.lo = bk.lo.min(v);
                bk.hi = bk.hi.max(v);
            }
        }
    }
    b
}

/// Fits a fresh model by Adam on shuffled mini-batches.
pub fn train(dataset: &CaseControlDataset, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let q = dataset.q();
    let specs = config.specs(q)?;
    let mut model = NamModel::init(&specs, &input_bounds(dataset), derive_seed(config.seed, INIT_TAG))?;
    let lens: Vec<usize> = model.param_tensors_mut().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(config.adam, &lens)?;
    let mut shuffle_rng = stream_rng(config.seed, SHUFFLE_TAG);
    let mut dropout_rngs: Vec<StreamRng> = (0..q)
        .map(|k| stream_rng(derive_seed(config.seed, DROPOUT_TAG), k as u64))
        .collect();

    let pairs = dataset.pairs();
    let initial = model.mean_loss(pairs)?;
    let mut trace = LossTrace {
        initial,
        epochs: Vec::with_capacity(config.epochs),
    };
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&CaseControlPair> = chunk.iter().map(|&i| &pairs[i]).collect();
            let fwd = model
                .forward_pairs(&batch, Some(&mut dropout_rngs), true)
                .map_err(|e| match e {
                    Error::NonFinite { subnet } => Error::NanLoss {
                        epoch,
                        batch: bi,
                        subnet: Some(subnet),
                    },
                    other => other,
                })?;
            if !fwd.loss.is_finite() {
                return Err(Error::NanLoss {
                    epoch,
                    batch: bi,
                    subnet: None,
                });
            }
            total += fwd.loss * chunk.len() as f64;
            let grads = model.backward(&fwd);
            let mut params = model.param_tensors_mut();
            adam.step(&mut params, &grads.tensors())?;
        }
        let mean = total / pairs.len() as f64;
        debug!("epoch {} loss {mean:.6}", epoch + 1);
        trace.epochs.push(mean);
        if let Some(patience) = config.patience {
            if mean < best {
                best = mean;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    debug!("early stop after epoch {}", epoch + 1);
                    break;
                }
            }
        }
    }
    Ok(TrainOutput {
        model,
        trace,
        steps: adam.step_count(),
    })
}
