use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::event::{Dyad, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FullDyadic,
    GrowingCitation,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::FullDyadic => "full-dyadic",
            Regime::GrowingCitation => "growing-citation",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "full-dyadic" | "full" => Ok(Regime::FullDyadic),
            "growing-citation" | "growing" => Ok(Regime::GrowingCitation),
            _ => Err(Error::parse("regime", format!("unknown regime {s:?}"))),
        }
    }
}

/// The set of dyads that could have produced an event at a given time.
///
/// `FullDyadic` is every ordered pair of distinct nodes. `GrowingCitation`
/// admits a node as receiver once its entry time is strictly in the past and
/// as sender from its entry time on. Neither form materializes its dyads.
#[derive(Debug, Clone)]
pub enum RiskSet {
    FullDyadic {
        node_count: usize,
    },
    GrowingCitation {
        /// Node ids sorted by entry time.
        order: Vec<NodeId>,
        /// Entry times aligned with `order`.
        sorted_entry: Vec<f64>,
        entry: Vec<f64>,
    },
}

impl RiskSet {
    pub fn full(node_count: usize) -> Self {
        RiskSet::FullDyadic { node_count }
    }

    pub fn growing(entry_times: Vec<f64>) -> Result<Self> {
        if entry_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("entry times must be finite"));
        }
        let mut order: Vec<NodeId> = (0..entry_times.len() as NodeId).collect();
        order.sort_by(|&a, &b| {
            entry_times[a as usize]
                .total_cmp(&entry_times[b as usize])
                .then(a.cmp(&b))
        });
        let sorted_entry = order.iter().map(|&n| entry_times[n as usize]).collect();
        Ok(RiskSet::GrowingCitation {
            order,
            sorted_entry,
            entry: entry_times,
        })
    }

    pub fn regime(&self) -> Regime {
        match self {
            RiskSet::FullDyadic { .. } => Regime::FullDyadic,
            RiskSet::GrowingCitation { .. } => Regime::GrowingCitation,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            RiskSet::FullDyadic { node_count } => *node_count,
            RiskSet::GrowingCitation { entry, .. } => entry.len(),
        }
    }

    /// Number of eligible senders and receivers at `t`. Under
    /// `GrowingCitation` the receivers are a prefix of the senders in entry order.
    fn counts(&self, t: f64) -> (usize, usize) {
        match self {
            RiskSet::FullDyadic { node_count } => (*node_count, *node_count),
            RiskSet::GrowingCitation { sorted_entry, .. } => {
                let senders = sorted_entry.partition_point(|&e| e <= t);
                let receivers = sorted_entry.partition_point(|&e| e < t);
                (senders, receivers)
            }
        }
    }

    pub fn size_at(&self, t: f64) -> u64 {
        let (s, r) = self.counts(t);
        // receivers are always eligible senders, so |s x r| loses exactly r self-pairs
        (s as u64) * (r as u64) - r as u64
    }

    /// Entry time per node (all zero for `FullDyadic`).
    pub fn entry_times(&self) -> Vec<f64> {
        match self {
            RiskSet::FullDyadic { node_count } => vec![0.0; *node_count],
            RiskSet::GrowingCitation { entry, .. } => entry.clone(),
        }
    }

    pub fn is_sender(&self, node: NodeId, t: f64) -> bool {
        match self {
            RiskSet::FullDyadic { node_count } => (node as usize) < *node_count,
            RiskSet::GrowingCitation { entry, .. } => {
                entry.get(node as usize).is_some_and(|&e| e <= t)
            }
        }
    }

    pub fn is_receiver(&self, node: NodeId, t: f64) -> bool {
        match self {
            RiskSet::FullDyadic { node_count } => (node as usize) < *node_count,
            RiskSet::GrowingCitation { entry, .. } => {
                entry.get(node as usize).is_some_and(|&e| e < t)
            }
        }
    }

    pub fn contains(&self, dyad: Dyad, t: f64) -> bool {
        dyad.sender != dyad.receiver
            && self.is_sender(dyad.sender, t)
            && self.is_receiver(dyad.receiver, t)
    }

    pub fn senders_at(&self, t: f64) -> Vec<NodeId> {
        match self {
            RiskSet::FullDyadic { node_count } => (0..*node_count as NodeId).collect(),
            RiskSet::GrowingCitation { order, .. } => order[..self.counts(t).0].to_vec(),
        }
    }

    pub fn receivers_at(&self, t: f64) -> Vec<NodeId> {
        match self {
            RiskSet::FullDyadic { node_count } => (0..*node_count as NodeId).collect(),
            RiskSet::GrowingCitation { order, .. } => order[..self.counts(t).1].to_vec(),
        }
    }

    /// All dyads at risk at `t`. Only for small instances and tests.
    pub fn enumerate(&self, t: f64) -> Vec<Dyad> {
        let senders = self.senders_at(t);
        let receivers = self.receivers_at(t);
        let mut out = Vec::with_capacity(senders.len() * receivers.len());
        for &s in &senders {
            for &r in &receivers {
                if s != r {
                    out.push(Dyad::new(s, r));
                }
            }
        }
        out
    }

    /// Uniform draw from the risk set at `t` minus `observed`, by rejection.
    ///
    /// Returns `None` when nothing but `observed` is at risk.
    pub fn sample_excluding<R: Rng + ?Sized>(
        &self,
        t: f64,
        observed: Dyad,
        rng: &mut R,
    ) -> Option<Dyad> {
        let size = self.size_at(t);
        let others = size - u64::from(self.contains(observed, t));
        if others == 0 {
            return None;
        }
        let (ns, nr) = self.counts(t);
        let node = |i: usize| -> NodeId {
            match self {
                RiskSet::FullDyadic { .. } => i as NodeId,
                RiskSet::GrowingCitation { order, .. } => order[i],
            }
        };
        loop {
            let s = node(rng.random_range(0..ns));
            let r = node(rng.random_range(0..nr));
            if s != r && (s, r) != (observed.sender, observed.receiver) {
                return Some(Dyad::new(s, r));
            }
        }
    }
}
