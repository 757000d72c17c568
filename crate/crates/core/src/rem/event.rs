use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;

/// Ordered sender/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dyad {
    pub sender: NodeId,
    pub receiver: NodeId,
}

impl Dyad {
    pub fn new(sender: NodeId, receiver: NodeId) -> Self {
        Dyad { sender, receiver }
    }
}

/// A directed, time-stamped interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub time: f64,
}

impl Event {
    pub fn new(sender: NodeId, receiver: NodeId, time: f64) -> Result<Self> {
        if sender == receiver {
            return Err(Error::InvalidEvent {
                index: 0,
                message: format!("self-loop on node {sender}"),
            });
        }
        if !time.is_finite() {
            return Err(Error::InvalidEvent {
                index: 0,
                message: format!("non-finite time {time}"),
            });
        }
        Ok(Event {
            sender,
            receiver,
            time,
        })
    }

    pub fn dyad(&self) -> Dyad {
        Dyad::new(self.sender, self.receiver)
    }
}

/// Time-ordered events over `node_count` nodes. Ties keep input order.
///
/// `recorded` optionally carries per-event covariate columns as they appeared
/// in the input file (for simulated data these are the case covariates).
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    events: Vec<Event>,
    node_count: usize,
    recorded: Option<Vec<Vec<f64>>>,
}

impl EventSequence {
    pub fn new(events: Vec<Event>, node_count: usize) -> Result<Self> {
        let mut last = f64::NEG_INFINITY;
        for (index, e) in events.iter().enumerate() {
            let invalid = |message: String| Error::InvalidEvent { index, message };
            if e.sender == e.receiver {
                return Err(invalid(format!("self-loop on node {}", e.sender)));
            }
            if !e.time.is_finite() {
                return Err(invalid(format!("non-finite time {}", e.time)));
            }
            if e.time < last {
                return Err(invalid(format!("time {} precedes {}", e.time, last)));
            }
            let hi = e.sender.max(e.receiver) as usize;
            if hi >= node_count {
                return Err(invalid(format!(
                    "node {hi} outside node count {node_count}"
                )));
            }
            last = e.time;
        }
        Ok(EventSequence {
            events,
            node_count,
            recorded: None,
        })
    }

    /// Node count inferred as one past the largest id.
    pub fn from_events(events: Vec<Event>) -> Result<Self> {
        let n = events
            .iter()
            .map(|e| e.sender.max(e.receiver) as usize + 1)
            .max()
            .unwrap_or(0);
        Self::new(events, n)
    }

    pub fn with_recorded(mut self, recorded: Vec<Vec<f64>>) -> Result<Self> {
        if recorded.len() != self.events.len() {
            return Err(Error::Dimension {
                expected: self.events.len(),
                got: recorded.len(),
            });
        }
        self.recorded = Some(recorded);
        Ok(self)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn recorded(&self) -> Option<&[Vec<f64>]> {
        self.recorded.as_deref()
    }
}
