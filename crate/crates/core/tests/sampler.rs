mod common;

use std::collections::HashMap;

use relnam::rem::{
    draw_controls, sample_controls, CovariateLayout, Dyad, EndoStat, Event, EventSequence, NodalCovariates, NodeId,
    NodeTable, Regime, RiskSet, Scaling, TimeSinceCap,
};
use relnam::simulator::{simulate_events, SimConfig, TrueEffectSpec};

fn ev(s: u32, r: u32, t: f64) -> Event {
    Event::new(s, r, t).unwrap()
}

#[test]
fn controls_are_uniform_over_the_other_19_dyads() {
    let seq = EventSequence::new(vec![ev(0, 1, 1.0)], 5).unwrap();
    let rs = RiskSet::full(5);
    let draws = draw_controls(&seq, &rs, 10_000, 42).unwrap();
    let mut counts: HashMap<Dyad, u64> = HashMap::new();
    for d in &draws[0] {
        *counts.entry(*d).or_default() += 1;
    }
    assert_eq!(counts.len(), 19);
    assert!(!counts.contains_key(&Dyad::new(0, 1)));
    let observed: Vec<u64> = counts.values().copied().collect();
    let (stat, crit) = common::chi_square(&observed, &[10_000.0 / 19.0; 19]);
    assert!(stat < crit, "chi-square {stat} >= {crit}");
}

#[test]
fn forced_choice_with_two_dyads() {
    let seq = EventSequence::new(vec![ev(0, 1, 1.0), ev(1, 0, 2.0)], 2).unwrap();
    let draws = draw_controls(&seq, &RiskSet::full(2), 50, 3).unwrap();
    assert!(draws[0].iter().all(|&d| d == Dyad::new(1, 0)));
    assert!(draws[1].iter().all(|&d| d == Dyad::new(0, 1)));
}

fn endogenous_layout() -> CovariateLayout {
    let mut layout = CovariateLayout::parse_list("sender:0,receiver:0,received:0:40,out_degree:0:40,time_since:0:300").unwrap();
    layout.time_cap = TimeSinceCap::SinceEntry;
    layout
}

fn simulated(regime: Regime, seed: u64) -> (relnam::simulator::Simulation, SimConfig) {
    let layout = endogenous_layout();
    let effects = ["linear(1)", "sine(1,6.283185307179586,0)", "linear(2)", "linear(-1)", "exp_decay(3)"]
        .iter()
        .enumerate()
        .map(|(k, s)| TrueEffectSpec {
            kind: s.parse().unwrap(),
            applies_to: k,
        })
        .collect();
    let cfg = SimConfig {
        node_count: 30,
        event_count: 300,
        regime,
        sender_attrs: 1,
        receiver_attrs: 1,
        layout,
        effects,
        seed,
    };
    (simulate_events(&cfg).unwrap(), cfg)
}

/// Covariates recomputed from scratch over the event prefix.
fn brute_force(nodes: &NodeTable, prefix: &[Event], d: Dyad, t: f64) -> Vec<f64> {
    let r = d.receiver;
    let received = prefix.iter().filter(|e| e.receiver == r).count() as f64;
    let out = prefix.iter().filter(|e| e.sender == r).count() as f64;
    let last = prefix.iter().filter(|e| e.receiver == r).map(|e| e.time).next_back();
    let since = t - last.unwrap_or(nodes.entry_times[r as usize]);
    vec![
        nodes.sender_attrs[d.sender as usize][0],
        nodes.receiver_attrs[r as usize][0],
        Scaling::new(0.0, 40.0).unwrap().apply(received),
        Scaling::new(0.0, 40.0).unwrap().apply(out),
        Scaling::new(0.0, 300.0).unwrap().apply(since),
    ]
}

#[test]
fn stored_covariates_match_prefix_recount() {
    for regime in [Regime::FullDyadic, Regime::GrowingCitation] {
        let (sim, cfg) = simulated(regime, 5);
        let rs = sim.risk_set(regime).unwrap();
        let provider = NodalCovariates::new(&cfg.layout, &sim.nodes).unwrap();
        let ds = sample_controls(&sim.events, &rs, &provider, 2, 9).unwrap();
        assert_eq!(ds.len(), 2 * sim.events.len());
        let events = sim.events.events();
        for p in ds.pairs() {
            let i = p.event_index;
            let t = events[i].time;
            let (case, control) = p.dyads.unwrap();
            assert_eq!(case, events[i].dyad());
            assert_ne!(control, case, "control equals case at event {i}");
            assert!(rs.contains(control, t));
            if regime == Regime::GrowingCitation {
                assert!(sim.nodes.entry_times[control.receiver as usize] < t);
            }
            assert_eq!(p.case, brute_force(&sim.nodes, &events[..i], case, t));
            assert_eq!(p.control, brute_force(&sim.nodes, &events[..i], control, t));
        }
    }
}

#[test]
fn stat_counters_match_recount() {
    let (sim, _) = simulated(Regime::FullDyadic, 8);
    let events = sim.events.events();
    let mut state = relnam::rem::StatState::new(30);
    for (i, e) in events.iter().enumerate().take(60) {
        state.apply_event(e).unwrap();
        for node in 0..30u32 {
            let n: NodeId = node;
            let prefix = &events[..=i];
            assert_eq!(state.out_count(n).unwrap(), prefix.iter().filter(|x| x.sender == n).count() as u64);
            assert_eq!(state.received(n).unwrap(), prefix.iter().filter(|x| x.receiver == n).count() as u64);
            let t = e.time + 2.5;
            let raw = state
                .statistic(n, t, EndoStat::ReceiverTimeSinceLast, TimeSinceCap::Fixed(99.0))
                .unwrap();
            let expect = prefix.iter().filter(|x| x.receiver == n).map(|x| t - x.time).next_back().unwrap_or(99.0);
            assert_eq!(raw, expect);
        }
    }
}

#[test]
fn same_seed_same_bytes_any_thread_count() {
    let (sim, cfg) = simulated(Regime::FullDyadic, 2);
    let rs = sim.risk_set(cfg.regime).unwrap();
    let provider = NodalCovariates::new(&cfg.layout, &sim.nodes).unwrap();
    let csv = |threads: usize, seed: u64| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let ds = pool.install(|| sample_controls(&sim.events, &rs, &provider, 1, seed).unwrap());
        let mut out = Vec::new();
        ds.write_csv(&mut out).unwrap();
        out
    };
    let a = csv(1, 4);
    assert_eq!(a, csv(1, 4));
    assert_eq!(a, csv(3, 4));
    assert_ne!(a, csv(1, 5));
}
