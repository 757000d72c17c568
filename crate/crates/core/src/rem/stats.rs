use serde::{Deserialize, Serialize};

use super::event::{Event, NodeId};
use crate::error::{Error, Result};

/// Endogenous receiver statistics maintained incrementally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndoStat {
    /// Events the receiver has sent so far.
    ReceiverOutDegree,
    /// Events the receiver has received so far.
    ReceiverReceived,
    /// Time since the receiver last received an event.
    ReceiverTimeSinceLast,
}

/// Value reported for time-since-last when a node was never a receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeSinceCap {
    /// `t - entry_time` of the node.
    #[default]
    SinceEntry,
    Fixed(f64),
}

/// Per-node counters reflecting every event applied so far.
#[derive(Debug, Clone, PartialEq)]
pub struct StatState {
    out_count: Vec<u64>,
    received: Vec<u64>,
    last_received: Vec<Option<f64>>,
    entry_times: Vec<f64>,
    last_time: Option<f64>,
    applied: usize,
}

impl StatState {
    pub fn new(node_count: usize) -> Self {
        Self::with_entry_times(vec![0.0; node_count])
    }

    pub fn with_entry_times(entry_times: Vec<f64>) -> Self {
        let n = entry_times.len();
        StatState {
            out_count: vec![0; n],
            received: vec![0; n],
            last_received: vec![None; n],
            entry_times,
            last_time: None,
            applied: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.out_count.len()
    }

    pub fn applied(&self) -> usize {
        self.applied
    }

    fn check(&self, node: NodeId) -> Result<usize> {
        let i = node as usize;
        if i < self.node_count() {
            Ok(i)
        } else {
            Err(Error::UnknownNode {
                node,
                node_count: self.node_count(),
            })
        }
    }

    pub fn apply_event(&mut self, e: &Event) -> Result<()> {
        if let Some(last) = self.last_time {
            if e.time < last {
                return Err(Error::Ordering { time: e.time, last });
            }
        }
        let s = self.check(e.sender)?;
        let r = self.check(e.receiver)?;
        self.out_count[s] += 1;
        self.received[r] += 1;
        self.last_received[r] = Some(e.time);
        self.last_time = Some(e.time);
        self.applied += 1;
        Ok(())
    }

    pub fn out_count(&self, node: NodeId) -> Result<u64> {
        Ok(self.out_count[self.check(node)?])
    }

    pub fn received(&self, node: NodeId) -> Result<u64> {
        Ok(self.received[self.check(node)?])
    }

    pub fn last_received(&self, node: NodeId) -> Result<Option<f64>> {
        Ok(self.last_received[self.check(node)?])
    }

    /// Raw value of one receiver statistic at time `t`.
    pub fn statistic(&self, receiver: NodeId, t: f64, stat: EndoStat, cap: TimeSinceCap) -> Result<f64> {
        let r = self.check(receiver)?;
        Ok(match stat {
            EndoStat::ReceiverOutDegree => self.out_count[r] as f64,
            EndoStat::ReceiverReceived => self.received[r] as f64,
            EndoStat::ReceiverTimeSinceLast => match (self.last_received[r], cap) {
                (Some(last), _) => t - last,
                (None, TimeSinceCap::SinceEntry) => t - self.entry_times[r],
                (None, TimeSinceCap::Fixed(c)) => c,
            },
        })
    }

    /// The requested receiver statistics for `dyad` at time `t`.
    pub fn endogenous_covariates(
        &self,
        dyad: super::Dyad,
        t: f64,
        stats: &[EndoStat],
        cap: TimeSinceCap,
    ) -> Result<Vec<f64>> {
        self.check(dyad.sender)?;
        stats
            .iter()
            .map(|&s| self.statistic(dyad.receiver, t, s, cap))
            .collect()
    }
}
