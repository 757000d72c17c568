//! Relational event data: events, risk sets, endogenous statistics,
//! covariate providers and the nested case-control sampler.

mod covariates;
mod dataset;
mod event;
pub mod io;
mod risk_set;
mod sampler;
mod stats;

pub use covariates::{
    CovariateLayout, CovariateProvider, CovariateSource, NodalCovariates, NodeTable, Scaling, Side,
};
pub use dataset::{CaseControlDataset, CaseControlPair};
pub use event::{Dyad, Event, EventSequence, NodeId};
pub use risk_set::{Regime, RiskSet};
pub use sampler::{draw_controls, sample_controls};
pub use stats::{EndoStat, StatState, TimeSinceCap};
