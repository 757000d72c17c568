//! Synthetic relational event sequences with a known additive log-hazard.
//!
//! Every supported covariate depends on the sender alone or on the receiver
//! alone, so the score of a dyad splits as `g(s) + h(r)`. Each event is drawn
//! exactly from `P(s, r) ∝ exp(g(s) + h(r))` over the risk set in two stages:
//! the sender from its marginal, then the receiver given the sender. Both
//! stages use the Gumbel-max trick, so each event costs O(nodes) instead of
//! O(dyads). Event `i` happens at time `i + 1`; the partial likelihood does not
//! depend on waiting times.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rem::{
    CovariateLayout, CovariateProvider, Dyad, Event, EventSequence, NodalCovariates, NodeId,
    NodeTable, Regime, RiskSet, Side, StatState,
};
use crate::rng::{gumbel, stream_rng};

pub const TRUTH_FORMAT: &str = "relnam-truth/1";

/// Parametric ground-truth effect shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectKind {
    Linear { slope: f64 },
    /// `amplitude * sin(frequency * x + phase)`, frequency in radians per unit.
    Sine { amplitude: f64, frequency: f64, phase: f64 },
    /// `scale * (x - center)^2`
    Quadratic { center: f64, scale: f64 },
    /// `exp(-rate * x)`
    ExpDecay { rate: f64 },
    /// Gaussian bump `height * exp(-((x - center) / width)^2 / 2)`.
    Bump { center: f64, width: f64, height: f64 },
    Constant { value: f64 },
}

impl EffectKind {
    pub const ZERO: EffectKind = EffectKind::Constant { value: 0.0 };

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            EffectKind::Linear { slope } => slope * x,
            EffectKind::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * x + phase).sin(),
            EffectKind::Quadratic { center, scale } => scale * (x - center).powi(2),
            EffectKind::ExpDecay { rate } => (-rate * x).exp(),
            EffectKind::Bump {
                center,
                width,
                height,
            } => {
                let z = (x - center) / width;
                height * (-0.5 * z * z).exp()
            }
            EffectKind::Constant { value } => value,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            EffectKind::Linear { slope } => slope.is_finite(),
            EffectKind::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
            EffectKind::Quadratic { center, scale } => center.is_finite() && scale.is_finite(),
            EffectKind::ExpDecay { rate } => rate.is_finite(),
            EffectKind::Bump {
                center,
                width,
                height,
            } => center.is_finite() && width.is_finite() && width > 0.0 && height.is_finite(),
            EffectKind::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid effect parameters {self}")))
        }
    }
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EffectKind::Linear { slope } => write!(f, "linear({slope})"),
            EffectKind::Sine {
                amplitude,
                frequency,
                phase,
            } => write!(f, "sine({amplitude},{frequency},{phase})"),
            EffectKind::Quadratic { center, scale } => write!(f, "quadratic({center},{scale})"),
            EffectKind::ExpDecay { rate } => write!(f, "exp_decay({rate})"),
            EffectKind::Bump {
                center,
                width,
                height,
            } => write!(f, "bump({center},{width},{height})"),
            EffectKind::Constant { value } => write!(f, "constant({value})"),
        }
    }
}

impl FromStr for EffectKind {
    type Err = Error;

    /// `name(p1,p2,..)`, e.g. `sine(1,6.283185307179586,0)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::parse(format!("effect '{s}'"), m);
        let s = s.trim();
        let (name, rest) = s.split_once('(').ok_or_else(|| bad("expected name(params)"))?;
        let inner = rest.strip_suffix(')').ok_or_else(|| bad("missing ')'"))?;
        let p = inner
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad("parameters must be numbers"))?;
        let kind = match (name.trim(), p.as_slice()) {
            ("linear", [slope]) => EffectKind::Linear { slope: *slope },
            ("sine", [a, f, ph]) => EffectKind::Sine {
                amplitude: *a,
                frequency: *f,
                phase: *ph,
            },
            ("quadratic", [c, sc]) => EffectKind::Quadratic {
                center: *c,
                scale: *sc,
            },
            ("exp_decay", [r]) => EffectKind::ExpDecay { rate: *r },
            ("bump", [c, w, h]) => EffectKind::Bump {
                center: *c,
                width: *w,
                height: *h,
            },
            ("constant", [v]) => EffectKind::Constant { value: *v },
            ("constant" | "zero", []) => EffectKind::ZERO,
            _ => return Err(bad("unknown effect or wrong parameter count")),
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueEffectSpec {
    pub kind: EffectKind,
    /// Covariate column the effect acts on.
    pub applies_to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub node_count: usize,
    pub event_count: usize,
    pub regime: Regime,
    /// Number of U(0,1) sender attributes per node.
    pub sender_attrs: usize,
    /// Number of U(0,1) receiver attributes per node.
    pub receiver_attrs: usize,
    pub layout: CovariateLayout,
    /// Columns without an entry have no effect.
    pub effects: Vec<TrueEffectSpec>,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_count < 2 {
            return Err(Error::config("node_count must be at least 2"));
        }
        if self.event_count < 1 {
            return Err(Error::config("event_count must be at least 1"));
        }
        if self.layout.q() == 0 {
            return Err(Error::config("layout needs at least one covariate"));
        }
        let mut seen = vec![false; self.layout.q()];
        for e in &self.effects {
            e.kind.validate()?;
            let slot = seen.get_mut(e.applies_to).ok_or_else(|| {
                Error::config(format!(
                    "effect {} applies to column {} but q = {}",
                    e.kind,
                    e.applies_to,
                    self.layout.q()
                ))
            })?;
            if std::mem::replace(slot, true) {
                return Err(Error::config(format!(
                    "column {} has more than one effect",
                    e.applies_to
                )));
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> TruthModel {
        let mut effects = vec![EffectKind::ZERO; self.layout.q()];
        for e in &self.effects {
            effects[e.applies_to] = e.kind;
        }
        TruthModel { effects }
    }

    pub fn entry_times(&self) -> Vec<f64> {
        match self.regime {
            Regime::FullDyadic => vec![0.0; self.node_count],
            Regime::GrowingCitation => {
                // two founding nodes at 0, the rest enter evenly over the horizon
                let spacing = self.event_count as f64 / self.node_count as f64;
                (0..self.node_count)
                    .map(|j| j.saturating_sub(1) as f64 * spacing)
                    .collect()
            }
        }
    }
}

/// Ground-truth score x ↦ sum_k f_k(x_k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthModel {
    pub effects: Vec<EffectKind>,
}

impl TruthModel {
    pub fn q(&self) -> usize {
        self.effects.len()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.effects.iter().zip(x).map(|(f, &v)| f.eval(v)).sum()
    }
}

/// Independent U(0,1) sender and receiver attributes for each node.
pub fn draw_nodal_covariates(config: &SimConfig) -> NodeTable {
    let mut rng = stream_rng(config.seed, 0);
    let n = config.node_count;
    let mut draw = |w: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..w).map(|_| rng.random::<f64>()).collect())
            .collect()
    };
    let sender_attrs = draw(config.sender_attrs);
    let receiver_attrs = draw(config.receiver_attrs);
    NodeTable {
        sender_attrs,
        receiver_attrs,
        entry_times: config.entry_times(),
    }
}

/// Index of the largest `logw[i] + Gumbel`, skipping `-inf` weights.
pub fn gumbel_max<R: Rng + ?Sized>(logw: &[f64], rng: &mut R) -> Option<usize> {
    let mut best = None;
    let mut best_key = f64::NEG_INFINITY;
    for (i, &w) in logw.iter().enumerate() {
        if w == f64::NEG_INFINITY {
            continue;
        }
        let key = w + gumbel(rng);
        if best.is_none() || key > best_key {
            best = Some(i);
            best_key = key;
        }
    }
    best
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact law of the next dyad when the score splits into sender and
/// receiver parts: `P(s, r) ∝ exp(g_s + h_r)` over `s != r`.
#[derive(Debug, Clone)]
pub struct DyadLaw {
    senders: Vec<NodeId>,
    sender_scores: Vec<f64>,
    /// g_s + log sum_{r != s} exp(h_r - h_max)
    sender_logw: Vec<f64>,
    receivers: Vec<NodeId>,
    receiver_scores: Vec<f64>,
    receiver_pos: Vec<u32>,
    h_max: f64,
    log_norm: f64,
}

const ABSENT: u32 = u32::MAX;

impl DyadLaw {
    pub fn new(
        node_count: usize,
        senders: Vec<NodeId>,
        sender_scores: Vec<f64>,
        receivers: Vec<NodeId>,
        receiver_scores: Vec<f64>,
    ) -> Option<Self> {
        assert_eq!(senders.len(), sender_scores.len());
        assert_eq!(receivers.len(), receiver_scores.len());
        if receivers.is_empty() || senders.is_empty() {
            return None;
        }
        let h_max = receiver_scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let b: Vec<f64> = receiver_scores.iter().map(|h| (h - h_max).exp()).collect();
        let total: f64 = b.iter().sum();
        let mut receiver_pos = vec![ABSENT; node_count];
        for (i, &r) in receivers.iter().enumerate() {
            receiver_pos[r as usize] = i as u32;
        }
        let sender_logw = senders
            .iter()
            .zip(&sender_scores)
            .map(|(&s, &g)| {
                let excl = match receiver_pos[s as usize] {
                    ABSENT => total,
                    i if b[i as usize] > 0.5 * total => b
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i as usize)
                        .map(|(_, v)| v)
                        .sum(),
                    i => total - b[i as usize],
                };
                if excl > 0.0 {
                    g + excl.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect::<Vec<_>>();
        let log_norm = log_sum_exp(&sender_logw);
        if !log_norm.is_finite() {
            return None;
        }
        Some(DyadLaw {
            senders,
            sender_scores,
            sender_logw,
            receivers,
            receiver_scores,
            receiver_pos,
            h_max,
            log_norm,
        })
    }

    /// log P(s, r); `-inf` outside the support.
    pub fn log_prob(&self, dyad: Dyad) -> f64 {
        let Some(si) = self.senders.iter().position(|&s| s == dyad.sender) else {
            return f64::NEG_INFINITY;
        };
        let ri = match self.receiver_pos.get(dyad.receiver as usize) {
            Some(&p) if p != ABSENT && dyad.sender != dyad.receiver => p as usize,
            _ => return f64::NEG_INFINITY,
        };
        self.sender_scores[si] + (self.receiver_scores[ri] - self.h_max) - self.log_norm
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Dyad {
        let si = gumbel_max(&self.sender_logw, rng).expect("law has positive mass");
        let s = self.senders[si];
        let mut best = None;
        let mut best_key = f64::NEG_INFINITY;
        for (i, (&r, &h)) in self.receivers.iter().zip(&self.receiver_scores).enumerate() {
            if r == s {
                continue;
            }
            let key = h + gumbel(rng);
            if best.is_none() || key > best_key {
                best = Some(i);
                best_key = key;
            }
        }
        Dyad::new(s, self.receivers[best.expect("sender has a receiver")])
    }
}

/// Output of [`simulate_events`].
#[derive(Debug, Clone)]
pub struct Simulation {
    pub nodes: NodeTable,
    /// Events with their case covariates recorded.
    pub events: EventSequence,
    pub truth: TruthModel,
    /// log P(event i | history) under the truth, over the full risk set.
    pub log_probs: Vec<f64>,
}

impl Simulation {
    pub fn risk_set(&self, regime: Regime) -> Result<RiskSet> {
        match regime {
            Regime::FullDyadic => Ok(RiskSet::full(self.nodes.node_count())),
            Regime::GrowingCitation => RiskSet::growing(self.nodes.entry_times.clone()),
        }
    }
}

pub fn simulate_events(config: &SimConfig) -> Result<Simulation> {
    config.validate()?;
    let nodes = draw_nodal_covariates(config);
    simulate_with_nodes(config, nodes)
}

/// Like [`simulate_events`] with a caller-supplied node table.
pub fn simulate_with_nodes(config: &SimConfig, nodes: NodeTable) -> Result<Simulation> {
    config.validate()?;
    if nodes.node_count() != config.node_count {
        return Err(Error::config("node table size differs from node_count"));
    }
    let provider = NodalCovariates::new(&config.layout, &nodes)?;
    let truth = config.truth();
    let risk_set = match config.regime {
        Regime::FullDyadic => RiskSet::full(config.node_count),
        Regime::GrowingCitation => RiskSet::growing(nodes.entry_times.clone())?,
    };
    let columns = &config.layout.columns;
    let (sender_cols, receiver_cols): (Vec<usize>, Vec<usize>) =
        (0..columns.len()).partition(|&k| columns[k].side() == Side::Sender);

    let mut state = StatState::with_entry_times(nodes.entry_times.clone());
    let mut rng = stream_rng(config.seed, 1);
    let mut events = Vec::with_capacity(config.event_count);
    let mut recorded = Vec::with_capacity(config.event_count);
    let mut log_probs = Vec::with_capacity(config.event_count);
    let side_score = |cols: &[usize], node: NodeId, t: f64, state: &StatState| -> Result<f64> {
        cols.iter().try_fold(0.0, |acc, &k| {
            Ok(acc + truth.effects[k].eval(provider.node_value(k, state, node, t)?))
        })
    };

    for i in 0..config.event_count {
        let t = (i + 1) as f64;
        let senders = risk_set.senders_at(t);
        let receivers = risk_set.receivers_at(t);
        let g = senders
            .iter()
            .map(|&s| side_score(&sender_cols, s, t, &state))
            .collect::<Result<Vec<_>>>()?;
        let h = receivers
            .iter()
            .map(|&r| side_score(&receiver_cols, r, t, &state))
            .collect::<Result<Vec<_>>>()?;
        let law = DyadLaw::new(config.node_count, senders, g, receivers, h)
            .ok_or(Error::EmptyRiskSet { event_index: i })?;
        let dyad = law.sample(&mut rng);
        log_probs.push(law.log_prob(dyad));
        recorded.push(provider.covariates(&state, dyad, t)?);
        let e = Event::new(dyad.sender, dyad.receiver, t)?;
        state.apply_event(&e)?;
        events.push(e);
    }
    let events = EventSequence::new(events, config.node_count)?.with_recorded(recorded)?;
    Ok(Simulation {
        nodes,
        events,
        truth,
        log_probs,
    })
}

/// On-disk description of a simulation (`truth.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub format: String,
    pub config: SimConfig,
    pub truth: TruthModel,
}

impl TruthFile {
    pub fn new(config: &SimConfig) -> Self {
        TruthFile {
            format: TRUTH_FORMAT.to_string(),
            config: config.clone(),
            truth: config.truth(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: TruthFile = serde_json::from_str(text)?;
        if t.format != TRUTH_FORMAT {
            return Err(Error::parse(
                "truth",
                format!("unsupported format tag '{}'", t.format),
            ));
        }
        t.config.validate()?;
        Ok(t)
    }
}

/// Brute-force log-probability of `dyad` at `t`: score every dyad in the
/// risk set and normalize. For tests on small networks.
pub fn brute_force_log_prob(
    risk_set: &RiskSet,
    provider: &dyn CovariateProvider,
    truth: &TruthModel,
    state: &StatState,
    t: f64,
    dyad: Dyad,
) -> Result<f64> {
    let mut scores = Vec::new();
    let mut target = None;
    for d in risk_set.enumerate(t) {
        let x = provider.covariates(state, d, t)?;
        if d == dyad {
            target = Some(scores.len());
        }
        scores.push(truth.score(&x));
    }
    let lse = log_sum_exp(&scores);
    Ok(target.map_or(f64::NEG_INFINITY, |i| scores[i] - lse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rem::CovariateSource;

    #[test]
    fn effect_values() {
        let sine: EffectKind = "sine(1,6.283185307179586,0)".parse().unwrap();
        assert!((sine.eval(0.25) - 1.0).abs() < 1e-15);
        let quad: EffectKind = "quadratic(0.5,4)".parse().unwrap();
        assert_eq!(quad.eval(1.0), 1.0);
        assert_eq!(quad.eval(0.5), 0.0);
        assert_eq!("zero()".parse::<EffectKind>().unwrap(), EffectKind::ZERO);
        assert!("bump(0.5,0,1)".parse::<EffectKind>().is_err());
        assert!("cubic(1)".parse::<EffectKind>().is_err());
        for e in ["linear(3)", "exp_decay(2)", "bump(0.5,0.1,2)", "constant(1.5)"] {
            let k: EffectKind = e.parse().unwrap();
            assert_eq!(k.to_string(), e);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig {
            node_count: 3,
            event_count: 5,
            regime: Regime::FullDyadic,
            sender_attrs: 1,
            receiver_attrs: 1,
            layout: CovariateLayout::new(vec![CovariateSource::SenderAttr(0)]),
            effects: vec![TrueEffectSpec {
                kind: EffectKind::Linear { slope: 1.0 },
                applies_to: 0,
            }],
            seed: 1,
        };
        c.validate().unwrap();
        c.effects[0].applies_to = 1;
        assert!(c.validate().is_err());
        c.effects[0].applies_to = 0;
        c.node_count = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn gumbel_max_skips_zero_weights() {
        let mut rng = stream_rng(3, 0);
        for _ in 0..100 {
            assert_eq!(gumbel_max(&[f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY], &mut rng), Some(1));
        }
        assert_eq!(gumbel_max(&[f64::NEG_INFINITY], &mut rng), None);
    }

    #[test]
    fn dyad_law_normalizes() {
        let law = DyadLaw::new(
            4,
            vec![0, 1, 2, 3],
            vec![0.1, -0.3, 2.0, 0.0],
            vec![0, 1, 2, 3],
            vec![1.0, 0.0, -1.0, 3.0],
        )
        .unwrap();
        let mut total = 0.0;
        for s in 0..4 {
            for r in 0..4 {
                let lp = law.log_prob(Dyad::new(s, r));
                if s == r {
                    assert_eq!(lp, f64::NEG_INFINITY);
                } else {
                    total += lp.exp();
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dominant_receiver_excluded_for_itself() {
        // receiver 0 carries nearly all mass; sender 0 must still find a partner
        let law = DyadLaw::new(3, vec![0, 1, 2], vec![0.0; 3], vec![0, 1, 2], vec![40.0, 0.0, 0.0]).unwrap();
        let p = law.log_prob(Dyad::new(0, 1)).exp() + law.log_prob(Dyad::new(0, 2)).exp();
        let expect = 2.0 / (2.0 * 40f64.exp() + 2.0 + 2.0);
        assert!((p - expect).abs() < 1e-20);
    }
}
