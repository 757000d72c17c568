//! Likelihood scoring against the generating model, curve metrics and a
//! fit-time benchmark.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nam::loss::softplus;
use crate::nam::{NamModel, SubnetSpec};
use crate::rem::{CaseControlDataset, CovariateLayout, CovariateSource, Regime};
use crate::simulator::{simulate_events, EffectKind, SimConfig, TrueEffectSpec, TruthModel};
use crate::trainer::{train, TrainConfig};
use crate::uncertainty::{center_curve, confidence_bands, CurveGrid, GprFit};

/// Anything that maps a covariate vector to a log-hazard score.
pub trait Scorer: Sync {
    fn score(&self, x: &[f64]) -> Result<f64>;
}

impl Scorer for NamModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x, None)?.score)
    }
}

impl Scorer for TruthModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        let s = TruthModel::score(self, x);
        if s.is_finite() {
            Ok(s)
        } else {
            Err(Error::config("truth score is not finite"))
        }
    }
}

/// The constant-zero baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroScorer;

impl Scorer for ZeroScorer {
    fn score(&self, _: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
}

fn pair_terms<S: Scorer + ?Sized>(scorer: &S, dataset: &CaseControlDataset) -> Result<Vec<f64>> {
    dataset
        .pairs()
        .par_iter()
        .map(|p| {
            let d = scorer.score(&p.case)? - scorer.score(&p.control)?;
            if !d.is_finite() {
                return Err(Error::config(format!(
                    "non-finite score difference at event {}",
                    p.event_index
                )));
            }
            Ok(-softplus(-d))
        })
        .collect()
}

/// Sum over pairs of `log sigmoid(delta)`.
pub fn log_partial_likelihood<S: Scorer + ?Sized>(scorer: &S, dataset: &CaseControlDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::config("cannot score an empty dataset"));
    }
    Ok(pair_terms(scorer, dataset)?.iter().sum())
}

/// Plug-in divergence: log-PL of the truth minus log-PL of the model.
pub fn kl_pop_vs_model<T: Scorer + ?Sized, M: Scorer + ?Sized>(
    truth: &T,
    model: &M,
    dataset: &CaseControlDataset,
) -> Result<f64> {
    Ok(log_partial_likelihood(truth, dataset)? - log_partial_likelihood(model, dataset)?)
}

/// Truth effect on the grid, centered to grid-mean zero.
pub fn centered_truth(grid: &CurveGrid, effect: &EffectKind) -> Vec<f64> {
    let mut v: Vec<f64> = grid.points().iter().map(|&x| effect.eval(x)).collect();
    center_curve(&mut v);
    v
}

/// RMS difference of the centered posterior mean and centered truth.
pub fn curve_rmse(fit: &GprFit, truth: &EffectKind) -> f64 {
    let mut est = fit.mean.clone();
    center_curve(&mut est);
    let t = centered_truth(&fit.grid, truth);
    let ss: f64 = est.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum();
    (ss / t.len() as f64).sqrt()
}

/// Share of grid points where the centered truth lies inside the band.
///
/// The band is shifted with the posterior mean so both curves share grid-mean zero.
pub fn band_coverage(fit: &GprFit, truth: &EffectKind) -> f64 {
    let shift = fit.mean.iter().sum::<f64>() / fit.mean.len() as f64;
    let t = centered_truth(&fit.grid, truth);
    let (lo, hi) = confidence_bands(fit);
    let inside = t
        .iter()
        .enumerate()
        .filter(|&(i, &v)| lo[i] - shift <= v && v <= hi[i] - shift)
        .count();
    inside as f64 / t.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub pairs: usize,
    pub log_pl_model: f64,
    pub log_pl_population: f64,
    pub log_pl_zero: f64,
    pub kl_pop_model: f64,
    pub kl_pop_zero: f64,
    /// Per covariate; empty when no curves were supplied.
    #[serde(default)]
    pub curve_rmse: Vec<f64>,
    #[serde(default)]
    pub band_coverage: Vec<f64>,
}

impl ScoreReport {
    /// Likelihood scores of `model` against `truth`; curve metrics for each
    /// supplied fit whose covariate has a truth effect.
    pub fn compute(model: &NamModel, truth: &TruthModel, dataset: &CaseControlDataset, fits: &[GprFit]) -> Result<Self> {
        let log_pl_model = log_partial_likelihood(model, dataset)?;
        let log_pl_population = log_partial_likelihood(truth, dataset)?;
        let log_pl_zero = log_partial_likelihood(&ZeroScorer, dataset)?;
        let mut curve_rmse_v = Vec::with_capacity(fits.len());
        let mut coverage = Vec::with_capacity(fits.len());
        for f in fits {
            let effect = truth.effects.get(f.grid.covariate).ok_or(Error::Dimension {
                expected: f.grid.covariate + 1,
                got: truth.q(),
            })?;
            curve_rmse_v.push(curve_rmse(f, effect));
            coverage.push(band_coverage(f, effect));
        }
        Ok(ScoreReport {
            pairs: dataset.len(),
            log_pl_model,
            log_pl_population,
            log_pl_zero,
            kl_pop_model: log_pl_population - log_pl_model,
            kl_pop_zero: log_pl_population - log_pl_zero,
            curve_rmse: curve_rmse_v,
            band_coverage: coverage,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub events: usize,
    pub nodes: usize,
    pub spec: SubnetSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub q: usize,
    pub seconds: f64,
}

/// Simulation config with `q` sender attributes, each with a sine effect.
pub fn bench_sim_config(q: usize, events: usize, nodes: usize, seed: u64) -> SimConfig {
    SimConfig {
        node_count: nodes,
        event_count: events,
        regime: Regime::FullDyadic,
        sender_attrs: q,
        receiver_attrs: 0,
        layout: CovariateLayout::new((0..q).map(CovariateSource::SenderAttr).collect()),
        effects: (0..q)
            .map(|k| TrueEffectSpec {
                kind: EffectKind::Sine {
                    amplitude: 1.0,
                    frequency: std::f64::consts::TAU,
                    phase: k as f64,
                },
                applies_to: k,
            })
            .collect(),
        seed,
    }
}

/// Wall-clock seconds to train at each covariate count. Simulation and
/// control sampling are excluded from the timing.
pub fn bench_scaling(qs: &[usize], config: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(qs.len());
    for &q in qs {
        let sim_cfg = bench_sim_config(q, config.events, config.nodes, config.seed);
        let sim = simulate_events(&sim_cfg)?;
        let rs = sim.risk_set(sim_cfg.regime)?;
        let provider = crate::rem::NodalCovariates::new(&sim_cfg.layout, &sim.nodes)?;
        let ds = crate::rem::sample_controls(&sim.events, &rs, &provider, 1, config.seed)?;
        let tc = TrainConfig {
            batch_size: config.batch_size,
            epochs: config.epochs,
            seed: config.seed,
            ..TrainConfig::new(config.spec.clone())
        };
        let start = Instant::now();
        train(&ds, &tc)?;
        rows.push(BenchRow {
            q,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

/// CSV `q,seconds`.
pub fn write_bench_csv<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["q", "seconds"])?;
    for r in rows {
        wtr.write_record([r.q.to_string(), r.seconds.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<bench csv>", e))?;
    Ok(())
}
