use relnam::nam::SubnetSpec;
use relnam::rem::{sample_controls, CaseControlDataset, CovariateLayout, NodalCovariates, Regime};
use relnam::rng::stream_rng;
use relnam::simulator::{simulate_events, EffectKind, SimConfig, TrueEffectSpec};
use relnam::trainer::{k_fold_cv, resample_indices, train, TrainConfig};
use relnam::uncertainty::{center_curve, CurveGrid};

fn simulated_pairs(effect: &str, nodes: usize, events: usize, seed: u64) -> CaseControlDataset {
    let cfg = SimConfig {
        node_count: nodes,
        event_count: events,
        regime: Regime::FullDyadic,
        sender_attrs: 1,
        receiver_attrs: 0,
        layout: CovariateLayout::parse_list("sender:0").unwrap(),
        effects: vec![TrueEffectSpec {
            kind: effect.parse().unwrap(),
            applies_to: 0,
        }],
        seed,
    };
    let sim = simulate_events(&cfg).unwrap();
    let rs = sim.risk_set(cfg.regime).unwrap();
    let provider = NodalCovariates::new(&cfg.layout, &sim.nodes).unwrap();
    sample_controls(&sim.events, &rs, &provider, 1, seed + 1).unwrap()
}

#[test]
fn recovers_linear_effect() {
    let ds = simulated_pairs("linear(3)", 200, 20_000, 21);
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 256,
        ..TrainConfig::new(SubnetSpec::parse_arch("model1", 0.0).unwrap())
    };
    let out = train(&ds, &cfg).unwrap();
    assert!(out.trace.last() < out.trace.initial);
    assert!(out.trace.epochs.iter().all(|l| l.is_finite()));
    let grid = CurveGrid::new(0, 0.0, 1.0, 100).unwrap();
    let pts = grid.points();
    let mut fitted = out.model.evaluate_subnet(0, &pts);
    let mut truth: Vec<f64> = pts.iter().map(|&x| EffectKind::Linear { slope: 3.0 }.eval(x)).collect();
    center_curve(&mut fitted);
    center_curve(&mut truth);
    let rmse = (fitted.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 100.0).sqrt();
    assert!(rmse < 0.1, "rmse {rmse}");
}

#[test]
fn deep_preset_beats_single_unit_on_wiggly_truth() {
    let ds = simulated_pairs("sine(2,12.566370614359172,0)", 300, 6_000, 5);
    let cfg = TrainConfig {
        epochs: 8,
        batch_size: 128,
        ..TrainConfig::new(SubnetSpec::parse_arch("model3", 0.0).unwrap())
    };
    let grid = [
        SubnetSpec::parse_arch("model3", 0.0).unwrap(),
        SubnetSpec::parse_arch("1", 0.0).unwrap(),
    ];
    let report = k_fold_cv(&ds, &grid, 2, &cfg).unwrap();
    assert!(report.cells.iter().all(|c| c.fold_losses.len() == 2));
    assert!(
        report.cells[0].mean < report.cells[1].mean,
        "model3 {} vs single unit {}",
        report.cells[0].mean,
        report.cells[1].mean
    );
    assert_eq!(report.ranking(), vec![0, 1]);
}

#[test]
fn bootstrap_inclusion_law() {
    let n = 10_000;
    let idx = resample_indices(n, &mut stream_rng(12, 0));
    assert_eq!(idx.len(), n);
    let mut counts = vec![0u32; n];
    for i in idx {
        counts[i] += 1;
    }
    let share = |k: u32| counts.iter().filter(|&&c| c == k).count() as f64 / n as f64;
    let unique = 1.0 - share(0);
    assert!((unique - (1.0 - (-1.0f64).exp())).abs() < 0.02, "unique share {unique}");
    // Binomial(n, 1/n) is close to Poisson(1): P(1) = e^-1, P(2) = e^-1 / 2
    assert!((share(1) - (-1.0f64).exp()).abs() < 0.02);
    assert!((share(2) - (-1.0f64).exp() / 2.0).abs() < 0.02);
}

#[test]
fn training_is_bitwise_repeatable() {
    let ds = simulated_pairs("bump(0.5,0.1,2)", 50, 2_000, 3);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 64,
        ..TrainConfig::new(SubnetSpec::new(vec![8, 8], 0.05).unwrap())
    };
    let a = train(&ds, &cfg).unwrap();
    let b = train(&ds, &cfg).unwrap();
    assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
    assert!(a.trace.last() < a.trace.initial);
}
