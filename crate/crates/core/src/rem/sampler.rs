use rayon::prelude::*;

use super::covariates::CovariateProvider;
use super::dataset::{CaseControlDataset, CaseControlPair};
use super::event::{Dyad, EventSequence};
use super::risk_set::RiskSet;
use super::stats::StatState;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Draws the control dyads for every event: `m` independent uniform draws
/// from the risk set at the event time, excluding the observed dyad.
///
/// Event `i` uses stream `i` of `seed`, so the result does not depend on how
/// the work is scheduled.
pub fn draw_controls(
    seq: &EventSequence,
    risk_set: &RiskSet,
    m: usize,
    seed: u64,
) -> Result<Vec<Vec<Dyad>>> {
    if m == 0 {
        return Err(Error::config("controls per case must be at least 1"));
    }
    if seq.node_count() > risk_set.node_count() {
        return Err(Error::config(format!(
            "events reference {} nodes but the risk set covers {}",
            seq.node_count(),
            risk_set.node_count()
        )));
    }
    seq.events()
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let observed = e.dyad();
            if !risk_set.contains(observed, e.time) {
                return Err(Error::NotAtRisk {
                    event_index: i,
                    sender: e.sender,
                    receiver: e.receiver,
                });
            }
            let mut rng = stream_rng(seed, i as u64);
            (0..m)
                .map(|_| {
                    risk_set
                        .sample_excluding(e.time, observed, &mut rng)
                        .ok_or(Error::UnsatisfiableControl { event_index: i })
                })
                .collect()
        })
        .collect()
}

/// Nested case-control sample of `seq`: `m` pairs per event, covariates of
/// case and controls computed from the events preceding it in input order.
pub fn sample_controls(
    seq: &EventSequence,
    risk_set: &RiskSet,
    covs: &dyn CovariateProvider,
    m: usize,
    seed: u64,
) -> Result<CaseControlDataset> {
    let draws = draw_controls(seq, risk_set, m, seed)?;
    let q = covs.dim();
    let mut state = StatState::with_entry_times(risk_set.entry_times());
    let mut pairs = Vec::with_capacity(seq.len() * m);
    for (i, (e, controls)) in seq.events().iter().zip(draws).enumerate() {
        let case = covs.covariates(&state, e.dyad(), e.time)?;
        for c in controls {
            let mut control = vec![0.0; q];
            covs.fill(&state, c, e.time, &mut control)?;
            pairs.push(CaseControlPair {
                event_index: i,
                case: case.clone(),
                control,
                dyads: Some((e.dyad(), c)),
            });
        }
        state.apply_event(e)?;
    }
    CaseControlDataset::new(q, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rem::{CovariateLayout, Event, NodalCovariates, NodeTable};

    fn chain(n_nodes: u32, n: usize) -> EventSequence {
        let evs = (0..n)
            .map(|i| {
                let s = i as u32 % n_nodes;
                Event::new(s, (s + 1) % n_nodes, i as f64).unwrap()
            })
            .collect();
        EventSequence::new(evs, n_nodes as usize).unwrap()
    }

    fn table(n: usize) -> NodeTable {
        let vals: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        NodeTable::new(vals.clone(), vals, vec![0.0; n]).unwrap()
    }

    #[test]
    fn one_pair_per_event() {
        let seq = chain(5, 30);
        let nodes = table(5);
        let layout = CovariateLayout::parse_list("sender:0,receiver:0,received:0:10").unwrap();
        let prov = NodalCovariates::new(&layout, &nodes).unwrap();
        let ds = sample_controls(&seq, &RiskSet::full(5), &prov, 1, 3).unwrap();
        assert_eq!(ds.len(), 30);
        let ds3 = sample_controls(&seq, &RiskSet::full(5), &prov, 3, 3).unwrap();
        assert_eq!(ds3.len(), 90);
    }

    #[test]
    fn unsatisfiable_names_event() {
        // node 1 cannot receive before 0.5, leaving (1,0) as the only dyad
        let rs = RiskSet::growing(vec![0.0, 0.5]).unwrap();
        let seq = EventSequence::new(
            vec![Event::new(1, 0, 0.5).unwrap()],
            2,
        )
        .unwrap();
        let nodes = NodeTable::bare(2);
        let layout = CovariateLayout::parse_list("received:0:1").unwrap();
        let prov = NodalCovariates::new(&layout, &nodes).unwrap();
        let err = sample_controls(&seq, &rs, &prov, 1, 0).unwrap_err();
        assert!(matches!(err, Error::UnsatisfiableControl { event_index: 0 }));
    }

    #[test]
    fn observed_dyad_must_be_at_risk() {
        let rs = RiskSet::growing(vec![0.0, 0.0, 5.0]).unwrap();
        let seq = EventSequence::new(vec![Event::new(0, 2, 1.0).unwrap()], 3).unwrap();
        let err = draw_controls(&seq, &rs, 1, 0).unwrap_err();
        assert!(matches!(err, Error::NotAtRisk { event_index: 0, .. }));
    }

    #[test]
    fn zero_controls_rejected() {
        let seq = chain(3, 3);
        assert!(draw_controls(&seq, &RiskSet::full(3), 0, 0).is_err());
    }
}
