use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{pair_nll, pair_nll_grad};
use super::subnet::{InputBounds, Subnet, SubnetCache, SubnetGradients, SubnetSpec};
use crate::error::{Error, Result};
use crate::rem::CaseControlPair;
use crate::rng::{stream_rng, StreamRng};

pub const MODEL_FORMAT: &str = "relnam-model/1";

/// q independent subnets whose outputs add up to the log-hazard score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamModel {
    format: String,
    subnets: Vec<Subnet>,
}

/// Score of one covariate vector plus its per-subnet terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub score: f64,
    pub parts: Vec<f64>,
}

/// A forward pass over a batch of pairs, kept for [`NamModel::backward`].
///
/// Rows `0..n` of each cache are the cases and `n..2n` the controls.
#[derive(Debug, Clone)]
pub struct PairBatch {
    caches: Vec<SubnetCache>,
    pub deltas: Vec<f64>,
    /// Mean pair loss over the batch.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamGradients {
    pub subnets: Vec<SubnetGradients>,
}

impl NamGradients {
    /// Flat views in the same order as [`NamModel::param_tensors_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.subnets
            .iter()
            .flat_map(|g| g.layers.iter())
            .flat_map(|l| {
                [
                    l.weights.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

impl NamModel {
    pub fn new(subnets: Vec<Subnet>) -> Result<Self> {
        if subnets.is_empty() {
            return Err(Error::config("model needs at least one subnet"));
        }
        for s in &subnets {
            s.validate()?;
        }
        Ok(NamModel {
            format: MODEL_FORMAT.to_string(),
            subnets,
        })
    }

    /// Fresh Glorot-uniform model; subnet `k` draws from stream `k` of `seed`.
    pub fn init(specs: &[SubnetSpec], bounds: &[InputBounds], seed: u64) -> Result<Self> {
        if specs.len() != bounds.len() {
            return Err(Error::Dimension {
                expected: specs.len(),
                got: bounds.len(),
            });
        }
        let subnets = specs
            .iter()
            .zip(bounds)
            .enumerate()
            .map(|(k, (spec, b))| Subnet::new(spec.clone(), *b, &mut stream_rng(seed, k as u64)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(subnets)
    }

    pub fn q(&self) -> usize {
        self.subnets.len()
    }

    pub fn subnets(&self) -> &[Subnet] {
        &self.subnets
    }

    pub fn subnets_mut(&mut self) -> &mut [Subnet] {
        &mut self.subnets
    }

    pub fn param_count(&self) -> usize {
        self.subnets.iter().map(Subnet::param_count).sum()
    }

    /// Parameter tensors: per subnet, per layer, weights then bias.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.subnets
            .iter_mut()
            .flat_map(|s| s.layers.iter_mut())
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.subnets
            .iter()
            .flat_map(|s| s.layers.iter())
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for t in self.param_tensors_mut() {
            t.copy_from_slice(&flat[off..off + t.len()]);
            off += t.len();
        }
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.q() {
            return Err(Error::Dimension {
                expected: self.q(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// f(x) = sum_k f_k(x_k). Train mode when `dropout` holds one stream per subnet.
    pub fn forward(&self, x: &[f64], dropout: Option<&mut [StreamRng]>) -> Result<Forward> {
        self.check_dim(x)?;
        let mut parts = Vec::with_capacity(self.q());
        let mut rngs = dropout.map(|r| r.iter_mut());
        for (k, net) in self.subnets.iter().enumerate() {
            let rng = rngs.as_mut().and_then(|it| it.next());
            let v = net.forward(&x[k..k + 1], rng, false).out[0] + net.output_bias();
            if !v.is_finite() {
                return Err(Error::NonFinite { subnet: k });
            }
            parts.push(v);
        }
        Ok(Forward {
            score: parts.iter().sum(),
            parts,
        })
    }

    /// Eval-mode scores for many covariate vectors.
    pub fn scores(&self, xs: &[&[f64]]) -> Result<Vec<f64>> {
        for x in xs {
            self.check_dim(x)?;
        }
        let mut total = vec![0.0; xs.len()];
        for (k, net) in self.subnets.iter().enumerate() {
            let col: Vec<f64> = xs.iter().map(|x| x[k]).collect();
            let out = net.evaluate(&col);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { subnet: k });
            }
            for (t, v) in total.iter_mut().zip(out) {
                *t += v;
            }
        }
        Ok(total)
    }

    /// Eval-mode f_k on raw covariate values.
    pub fn evaluate_subnet(&self, k: usize, xs: &[f64]) -> Vec<f64> {
        self.subnets[k].evaluate(xs)
    }

    /// Batched forward over pairs. The final output biases cancel in
    /// delta = f(case) - f(control) and are left out of it entirely.
    pub fn forward_pairs(
        &self,
        pairs: &[&CaseControlPair],
        dropout: Option<&mut [StreamRng]>,
        keep_grad: bool,
    ) -> Result<PairBatch> {
        let n = pairs.len();
        for p in pairs {
            self.check_dim(&p.case)?;
            self.check_dim(&p.control)?;
        }
        let column = |k: usize| -> Vec<f64> {
            pairs
                .iter()
                .map(|p| p.case[k])
                .chain(pairs.iter().map(|p| p.control[k]))
                .collect()
        };
        let caches: Vec<SubnetCache> = match dropout {
            Some(rngs) => {
                if rngs.len() != self.q() {
                    return Err(Error::Dimension {
                        expected: self.q(),
                        got: rngs.len(),
                    });
                }
                self.subnets
                    .par_iter()
                    .zip(rngs.par_iter_mut())
                    .enumerate()
                    .map(|(k, (net, rng))| net.forward(&column(k), Some(rng), keep_grad))
                    .collect()
            }
            None => self
                .subnets
                .par_iter()
                .enumerate()
                .map(|(k, net)| net.forward(&column(k), None, keep_grad))
                .collect(),
        };
        for (k, c) in caches.iter().enumerate() {
            if c.out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { subnet: k });
            }
        }
        let deltas: Vec<f64> = (0..n)
            .map(|i| caches.iter().map(|c| c.out[i] - c.out[n + i]).sum())
            .collect();
        let loss = if n == 0 {
            0.0
        } else {
            deltas.iter().map(|&d| pair_nll(d)).sum::<f64>() / n as f64
        };
        Ok(PairBatch {
            caches,
            deltas,
            loss,
        })
    }

    /// Exact gradient of the batch's mean pair loss.
    pub fn backward(&self, batch: &PairBatch) -> NamGradients {
        let n = batch.deltas.len();
        let scale = 1.0 / n.max(1) as f64;
        let mut grad_out = vec![0.0; 2 * n];
        for (i, &d) in batch.deltas.iter().enumerate() {
            let g = pair_nll_grad(d) * scale;
            grad_out[i] = g;
            grad_out[n + i] = -g;
        }
        let subnets = self
            .subnets
            .par_iter()
            .zip(batch.caches.par_iter())
            .map(|(net, cache)| net.backward(cache, &grad_out, n))
            .collect();
        NamGradients { subnets }
    }

    pub fn pair_loss(&self, pair: &CaseControlPair) -> Result<f64> {
        Ok(self.forward_pairs(&[pair], None, false)?.loss)
    }

    /// Eval-mode mean pair loss, computed in fixed-size chunks.
    pub fn mean_loss(&self, pairs: &[CaseControlPair]) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::config("empty pair set"));
        }
        let mut total = 0.0;
        for chunk in pairs.chunks(4096) {
            let refs: Vec<&CaseControlPair> = chunk.iter().collect();
            let b = self.forward_pairs(&refs, None, false)?;
            total += b.loss * chunk.len() as f64;
        }
        Ok(total / pairs.len() as f64)
    }

    /// Eval-mode pair deltas for the whole slice.
    pub fn pair_deltas(&self, pairs: &[CaseControlPair]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(4096) {
            let refs: Vec<&CaseControlPair> = chunk.iter().collect();
            out.extend(self.forward_pairs(&refs, None, false)?.deltas);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: NamModel = serde_json::from_str(text)?;
        if m.format != MODEL_FORMAT {
            return Err(Error::parse(
                "model",
                format!("unsupported format tag '{}'", m.format),
            ));
        }
        Self::new(m.subnets)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
