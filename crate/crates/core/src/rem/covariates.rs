use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::event::{Dyad, NodeId};
use super::stats::{EndoStat, StatState, TimeSinceCap};
use crate::error::{Error, Result};

/// Exogenous nodal attributes plus node entry times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTable {
    /// `sender_attrs[node][j]`
    pub sender_attrs: Vec<Vec<f64>>,
    /// `receiver_attrs[node][j]`
    pub receiver_attrs: Vec<Vec<f64>>,
    pub entry_times: Vec<f64>,
}

impl NodeTable {
    pub fn new(
        sender_attrs: Vec<Vec<f64>>,
        receiver_attrs: Vec<Vec<f64>>,
        entry_times: Vec<f64>,
    ) -> Result<Self> {
        let n = entry_times.len();
        if sender_attrs.len() != n || receiver_attrs.len() != n {
            return Err(Error::config("node table columns have different lengths"));
        }
        let width = |rows: &[Vec<f64>]| rows.first().map_or(0, Vec::len);
        let (ws, wr) = (width(&sender_attrs), width(&receiver_attrs));
        let ragged = sender_attrs.iter().any(|r| r.len() != ws)
            || receiver_attrs.iter().any(|r| r.len() != wr);
        if ragged {
            return Err(Error::config("node table rows have different widths"));
        }
        let finite = sender_attrs
            .iter()
            .chain(&receiver_attrs)
            .flatten()
            .chain(&entry_times)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("node table holds non-finite values"));
        }
        Ok(NodeTable {
            sender_attrs,
            receiver_attrs,
            entry_times,
        })
    }

    /// Attribute-free table with every node present from time 0.
    pub fn bare(node_count: usize) -> Self {
        NodeTable {
            sender_attrs: vec![Vec::new(); node_count],
            receiver_attrs: vec![Vec::new(); node_count],
            entry_times: vec![0.0; node_count],
        }
    }

    pub fn node_count(&self) -> usize {
        self.entry_times.len()
    }

    pub fn sender_width(&self) -> usize {
        self.sender_attrs.first().map_or(0, Vec::len)
    }

    pub fn receiver_width(&self) -> usize {
        self.receiver_attrs.first().map_or(0, Vec::len)
    }
}

/// Min-max map onto [0, 1] with clamping outside the declared range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub lo: f64,
    pub hi: f64,
}

impl Scaling {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::config(format!("invalid scaling range [{lo}, {hi}]")));
        }
        Ok(Scaling { lo, hi })
    }

    pub fn apply(&self, v: f64) -> f64 {
        ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Sender,
    Receiver,
}

/// Where one covariate column comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateSource {
    SenderAttr(usize),
    ReceiverAttr(usize),
    Endogenous { stat: EndoStat, scaling: Scaling },
}

impl CovariateSource {
    /// Every supported covariate depends on one endpoint only.
    pub fn side(&self) -> Side {
        match self {
            CovariateSource::SenderAttr(_) => Side::Sender,
            _ => Side::Receiver,
        }
    }
}

impl fmt::Display for CovariateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateSource::SenderAttr(j) => write!(f, "sender:{j}"),
            CovariateSource::ReceiverAttr(j) => write!(f, "receiver:{j}"),
            CovariateSource::Endogenous { stat, scaling } => {
                let name = match stat {
                    EndoStat::ReceiverOutDegree => "out_degree",
                    EndoStat::ReceiverReceived => "received",
                    EndoStat::ReceiverTimeSinceLast => "time_since",
                };
                write!(f, "{name}:{}:{}", scaling.lo, scaling.hi)
            }
        }
    }
}

impl FromStr for CovariateSource {
    type Err = Error;

    /// `sender:J`, `receiver:J`, or `{out_degree|received|time_since}:LO:HI`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::parse(format!("covariate '{s}'"), m);
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| p.parse::<f64>().map_err(|_| bad("expected a number"));
        match parts.as_slice() {
            ["sender", j] => Ok(CovariateSource::SenderAttr(
                j.parse().map_err(|_| bad("expected an attribute index"))?,
            )),
            ["receiver", j] => Ok(CovariateSource::ReceiverAttr(
                j.parse().map_err(|_| bad("expected an attribute index"))?,
            )),
            [name, lo, hi] => {
                let stat = match *name {
                    "out_degree" => EndoStat::ReceiverOutDegree,
                    "received" => EndoStat::ReceiverReceived,
                    "time_since" => EndoStat::ReceiverTimeSinceLast,
                    _ => return Err(bad("unknown statistic")),
                };
                Ok(CovariateSource::Endogenous {
                    stat,
                    scaling: Scaling::new(num(lo)?, num(hi)?)?,
                })
            }
            _ => Err(bad("unrecognized form")),
        }
    }
}

/// Ordered covariate columns, i.e. the meaning of x_1..x_q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateLayout {
    pub columns: Vec<CovariateSource>,
    #[serde(default)]
    pub time_cap: TimeSinceCap,
}

impl CovariateLayout {
    pub fn new(columns: Vec<CovariateSource>) -> Self {
        CovariateLayout {
            columns,
            time_cap: TimeSinceCap::default(),
        }
    }

    pub fn parse_list(s: &str) -> Result<Self> {
        let columns = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        if columns.is_empty() {
            return Err(Error::parse("covariate list", "no covariates given"));
        }
        Ok(Self::new(columns))
    }

    pub fn q(&self) -> usize {
        self.columns.len()
    }

    pub fn validate(&self, nodes: &NodeTable) -> Result<()> {
        for c in &self.columns {
            match *c {
                CovariateSource::SenderAttr(j) if j >= nodes.sender_width() => {
                    return Err(Error::config(format!(
                        "{c}: node table has {} sender attributes",
                        nodes.sender_width()
                    )))
                }
                CovariateSource::ReceiverAttr(j) if j >= nodes.receiver_width() => {
                    return Err(Error::config(format!(
                        "{c}: node table has {} receiver attributes",
                        nodes.receiver_width()
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Computes the covariate vector of any dyad from the current history.
pub trait CovariateProvider: Sync {
    fn dim(&self) -> usize;

    /// Writes x_{sr} at time `t` into `out`; `state` must hold exactly the
    /// events preceding the one being scored.
    fn fill(&self, state: &StatState, dyad: Dyad, t: f64, out: &mut [f64]) -> Result<()>;

    fn covariates(&self, state: &StatState, dyad: Dyad, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.fill(state, dyad, t, &mut out)?;
        Ok(out)
    }
}

/// Provider backed by a node table and a layout.
#[derive(Debug, Clone, Copy)]
pub struct NodalCovariates<'a> {
    layout: &'a CovariateLayout,
    nodes: &'a NodeTable,
}

impl<'a> NodalCovariates<'a> {
    pub fn new(layout: &'a CovariateLayout, nodes: &'a NodeTable) -> Result<Self> {
        layout.validate(nodes)?;
        Ok(NodalCovariates { layout, nodes })
    }

    pub fn layout(&self) -> &CovariateLayout {
        self.layout
    }

    /// Value of column `k` for `node` acting on that column's side.
    pub fn node_value(&self, k: usize, state: &StatState, node: NodeId, t: f64) -> Result<f64> {
        let n = node as usize;
        if n >= self.nodes.node_count() {
            return Err(Error::UnknownNode {
                node,
                node_count: self.nodes.node_count(),
            });
        }
        Ok(match self.layout.columns[k] {
            CovariateSource::SenderAttr(j) => self.nodes.sender_attrs[n][j],
            CovariateSource::ReceiverAttr(j) => self.nodes.receiver_attrs[n][j],
            CovariateSource::Endogenous { stat, scaling } => {
                scaling.apply(state.statistic(node, t, stat, self.layout.time_cap)?)
            }
        })
    }
}

impl CovariateProvider for NodalCovariates<'_> {
    fn dim(&self) -> usize {
        self.layout.q()
    }

    fn fill(&self, state: &StatState, dyad: Dyad, t: f64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: out.len(),
            });
        }
        for (k, slot) in out.iter_mut().enumerate() {
            let node = match self.layout.columns[k].side() {
                Side::Sender => dyad.sender,
                Side::Receiver => dyad.receiver,
            };
            *slot = self.node_value(k, state, node, t)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let layout = CovariateLayout::parse_list("sender:0, receiver:1,received:0:50").unwrap();
        assert_eq!(layout.q(), 3);
        let shown: Vec<String> = layout.columns.iter().map(|c| c.to_string()).collect();
        assert_eq!(shown, ["sender:0", "receiver:1", "received:0:50"]);
        assert!("bogus:1".parse::<CovariateSource>().is_err());
        assert!("received:5:1".parse::<CovariateSource>().is_err());
    }

    #[test]
    fn fills_by_side() {
        let nodes = NodeTable::new(
            vec![vec![0.1], vec![0.2], vec![0.3]],
            vec![vec![0.7], vec![0.8], vec![0.9]],
            vec![0.0; 3],
        )
        .unwrap();
        let layout = CovariateLayout::parse_list("sender:0,receiver:0,received:0:4").unwrap();
        let prov = NodalCovariates::new(&layout, &nodes).unwrap();
        let mut st = StatState::new(3);
        st.apply_event(&super::super::Event::new(0, 2, 1.0).unwrap()).unwrap();
        let x = prov.covariates(&st, Dyad::new(1, 2), 2.0).unwrap();
        assert_eq!(x, vec![0.2, 0.9, 0.25]);
    }

    #[test]
    fn layout_checks_widths() {
        let nodes = NodeTable::bare(3);
        let layout = CovariateLayout::parse_list("sender:0").unwrap();
        assert!(NodalCovariates::new(&layout, &nodes).is_err());
    }

    #[test]
    fn scaling_clamps() {
        let s = Scaling::new(0.0, 10.0).unwrap();
        assert_eq!(s.apply(5.0), 0.5);
        assert_eq!(s.apply(50.0), 1.0);
        assert_eq!(s.apply(-1.0), 0.0);
    }
}
