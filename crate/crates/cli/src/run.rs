use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;

use relnam::eval::{bench_scaling, write_bench_csv, BenchConfig, ScoreReport};
use relnam::nam::{NamModel, SubnetSpec, MODEL_FORMAT};
use relnam::rem::io::{read_events, read_nodes, write_events, write_nodes};
use relnam::rem::{sample_controls, CaseControlDataset, NodalCovariates, Regime, RiskSet};
use relnam::simulator::{simulate_events, SimConfig, TrueEffectSpec, TruthFile};
use relnam::trainer::{bootstrap_refits, k_fold_cv, train};
use relnam::uncertainty::{fit_curves, read_curves_csv, write_curves_csv, CurveGrid, GprOptions, PriorMean};
use relnam::{Error, Result};

use crate::args::*;
use crate::manifest::{RunManifest, MANIFEST_FORMAT};

/// Files a run read and wrote.
#[derive(Default)]
struct Outcome {
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
    formats: BTreeMap<String, String>,
}

impl Outcome {
    fn output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    fn format(&mut self, kind: &str, version: &str) {
        self.formats.insert(kind.to_string(), version.to_string());
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    let command = match command {
        Command::Replay(r) => {
            let m = RunManifest::read(&r.manifest)?;
            let mut cmd = m.config;
            if let Some(out) = r.out {
                set_out(&mut cmd, out);
            }
            cmd
        }
        other => other,
    };
    let command = absolutize(command)?;
    let start = Instant::now();
    let (name, seed, out, outcome) = execute(&command)?;
    let manifest = RunManifest {
        format: MANIFEST_FORMAT.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: name.to_string(),
        seed,
        config: command.clone(),
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        formats: outcome.formats,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    manifest.write(&out)?;
    info!("{name} finished in {:.2}s", manifest.wall_clock_seconds);
    Ok(())
}

fn set_out(cmd: &mut Command, out: PathBuf) {
    match cmd {
        Command::Simulate(a) => a.out = out,
        Command::Sample(a) => a.out = out,
        Command::Fit(a) => a.out = out,
        Command::Cv(a) => a.out = out,
        Command::Bootstrap(a) => a.out = out,
        Command::Curves(a) => a.out = out,
        Command::Score(a) => a.out = out,
        Command::Bench(a) => a.out = out,
        Command::Replay(_) => {}
    }
}

fn abs(p: &mut PathBuf) -> Result<()> {
    *p = std::path::absolute(&*p).map_err(|e| Error::io(p.clone(), e))?;
    Ok(())
}

/// Makes every path absolute so a manifest replays from any directory.
fn absolutize(mut cmd: Command) -> Result<Command> {
    match &mut cmd {
        Command::Simulate(a) => abs(&mut a.out)?,
        Command::Sample(a) => {
            abs(&mut a.events)?;
            abs(&mut a.nodes)?;
            if let Some(t) = &mut a.truth {
                abs(t)?;
            }
            abs(&mut a.out)?;
        }
        Command::Fit(a) => {
            abs(&mut a.pairs)?;
            abs(&mut a.out)?;
        }
        Command::Cv(a) => {
            abs(&mut a.pairs)?;
            abs(&mut a.out)?;
        }
        Command::Bootstrap(a) => {
            abs(&mut a.pairs)?;
            abs(&mut a.out)?;
        }
        Command::Curves(a) => {
            for m in &mut a.models {
                abs(m)?;
            }
            abs(&mut a.out)?;
        }
        Command::Score(a) => {
            abs(&mut a.pairs)?;
            abs(&mut a.model)?;
            abs(&mut a.truth)?;
            if let Some(c) = &mut a.curves {
                abs(c)?;
            }
            abs(&mut a.out)?;
        }
        Command::Bench(a) => abs(&mut a.out)?,
        Command::Replay(_) => unreachable!("replay is resolved before execution"),
    }
    Ok(cmd)
}

fn execute(cmd: &Command) -> Result<(&'static str, u64, PathBuf, Outcome)> {
    Ok(match cmd {
        Command::Simulate(a) => ("simulate", a.seed, a.out.clone(), simulate(a)?),
        Command::Sample(a) => ("sample", a.seed, a.out.clone(), sample(a)?),
        Command::Fit(a) => ("fit", a.seed, a.out.clone(), fit(a)?),
        Command::Cv(a) => ("cv", a.seed, a.out.clone(), cv(a)?),
        Command::Bootstrap(a) => ("bootstrap", a.seed, a.out.clone(), bootstrap(a)?),
        Command::Curves(a) => ("curves", a.seed, a.out.clone(), curves(a)?),
        Command::Score(a) => ("score", a.seed, a.out.clone(), score(a)?),
        Command::Bench(a) => ("bench", a.seed, a.out.clone(), bench(a)?),
        Command::Replay(_) => unreachable!("replay is resolved before execution"),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(dir: &Path, name: &str, outcome: &mut Outcome, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    outcome.output(name);
    Ok(())
}

fn write_json<T: serde::Serialize>(w: &mut impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w).map_err(|e| Error::io("<json>", e))
}

fn load_pairs(path: &Path, outcome: &mut Outcome) -> Result<CaseControlDataset> {
    outcome.inputs.push(path.to_path_buf());
    CaseControlDataset::read_csv(open(path)?).map_err(|e| with_path(path, e))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io { .. } => e,
        other => Error::parse(path.display().to_string(), other.to_string()),
    }
}

fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let config = SimConfig {
        node_count: a.nodes,
        event_count: a.events,
        regime: a.regime,
        sender_attrs: a.sender_attrs,
        receiver_attrs: a.receiver_attrs,
        layout: a.covariates.clone(),
        effects: a
            .effects
            .iter()
            .enumerate()
            .map(|(k, e)| TrueEffectSpec {
                kind: *e,
                applies_to: k,
            })
            .collect(),
        seed: a.seed,
    };
    if config.effects.len() != config.layout.q() {
        return Err(Error::config(format!(
            "{} effects given for {} covariates",
            config.effects.len(),
            config.layout.q()
        )));
    }
    let sim = simulate_events(&config)?;
    prepare_out(&a.out)?;
    let mut o = Outcome::default();
    write_file(&a.out, "events.csv", &mut o, |w| write_events(&sim.events, w))?;
    write_file(&a.out, "nodes.csv", &mut o, |w| write_nodes(&sim.nodes, w))?;
    let truth = TruthFile::new(&config);
    o.format("truth", &truth.format);
    write_file(&a.out, "truth.json", &mut o, |w| write_json(w, &truth))?;
    Ok(o)
}

fn sample(a: &SampleArgs) -> Result<Outcome> {
    let mut o = Outcome::default();
    let truth = match &a.truth {
        Some(p) => {
            o.inputs.push(p.clone());
            Some(TruthFile::from_json(&read_text(p)?).map_err(|e| with_path(p, e))?)
        }
        None => None,
    };
    let layout = match (&a.covariates, &truth) {
        (Some(l), _) => l.clone(),
        (None, Some(t)) => t.config.layout.clone(),
        (None, None) => return Err(Error::config("sample needs --covariates or --truth")),
    };
    let regime = a
        .regime
        .or(truth.as_ref().map(|t| t.config.regime))
        .unwrap_or(Regime::FullDyadic);
    o.inputs.push(a.nodes.clone());
    let nodes = read_nodes(open(&a.nodes)?).map_err(|e| with_path(&a.nodes, e))?;
    o.inputs.push(a.events.clone());
    let events = read_events(open(&a.events)?, Some(nodes.node_count())).map_err(|e| with_path(&a.events, e))?;
    let rs = match regime {
        Regime::FullDyadic => RiskSet::full(nodes.node_count()),
        Regime::GrowingCitation => RiskSet::growing(nodes.entry_times.clone())?,
    };
    let provider = NodalCovariates::new(&layout, &nodes)?;
    let ds = sample_controls(&events, &rs, &provider, a.controls, a.seed)?;
    prepare_out(&a.out)?;
    write_file(&a.out, "pairs.csv", &mut o, |w| ds.write_csv(w))?;
    Ok(o)
}

fn fit(a: &FitArgs) -> Result<Outcome> {
    let mut o = Outcome::default();
    let ds = load_pairs(&a.pairs, &mut o)?;
    let cfg = a.train.config(SubnetSpec::parse_arch(&a.arch, a.dropout)?, a.seed);
    let out = train(&ds, &cfg)?;
    prepare_out(&a.out)?;
    o.format("model", MODEL_FORMAT);
    write_file(&a.out, "model.json", &mut o, |w| write_model(w, &out.model))?;
    write_file(&a.out, "loss.csv", &mut o, |w| out.trace.write_csv(w))?;
    Ok(o)
}

fn write_model(w: &mut impl Write, model: &NamModel) -> Result<()> {
    w.write_all(model.to_json()?.as_bytes())
        .and_then(|_| writeln!(w))
        .map_err(|e| Error::io("<model>", e))
}

fn cv(a: &CvArgs) -> Result<Outcome> {
    let mut o = Outcome::default();
    let ds = load_pairs(&a.pairs, &mut o)?;
    let mut grid = Vec::new();
    for arch in &a.archs {
        for &d in &a.dropouts {
            grid.push(SubnetSpec::parse_arch(arch, d)?);
        }
    }
    let cfg = a.train.config(grid[0].clone(), a.seed);
    let report = k_fold_cv(&ds, &grid, a.folds, &cfg)?;
    prepare_out(&a.out)?;
    write_file(&a.out, "cv.csv", &mut o, |w| report.write_csv(w))?;
    write_file(&a.out, "cv.json", &mut o, |w| write_json(w, &report))?;
    Ok(o)
}

fn bootstrap(a: &BootstrapArgs) -> Result<Outcome> {
    let mut o = Outcome::default();
    let ds = load_pairs(&a.pairs, &mut o)?;
    let cfg = a.train.config(SubnetSpec::parse_arch(&a.arch, a.dropout)?, a.seed);
    let fits = bootstrap_refits(&ds, &cfg, a.refits, a.seed)?;
    prepare_out(&a.out)?;
    o.format("model", MODEL_FORMAT);
    for (i, f) in fits.iter().enumerate() {
        write_file(&a.out, &format!("model_b{i}.json"), &mut o, |w| write_model(w, &f.model))?;
    }
    Ok(o)
}

/// Expands directories into their `model_b{i}.json` files, ordered by i.
fn model_paths(entries: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in entries {
        if e.is_dir() {
            let mut found: Vec<(usize, PathBuf)> = fs::read_dir(e)
                .map_err(|err| Error::io(e, err))?
                .filter_map(|d| d.ok().map(|d| d.path()))
                .filter_map(|p| {
                    let name = p.file_name()?.to_str()?;
                    let i = name.strip_prefix("model_b")?.strip_suffix(".json")?.parse().ok()?;
                    Some((i, p))
                })
                .collect();
            if found.is_empty() {
                return Err(Error::config(format!("{} holds no model_b*.json files", e.display())));
            }
            found.sort();
            out.extend(found.into_iter().map(|(_, p)| p));
        } else {
            out.push(e.clone());
        }
    }
    Ok(out)
}

fn curves(a: &CurvesArgs) -> Result<Outcome> {
    let mut o = Outcome::default();
    let paths = model_paths(&a.models)?;
    let mut models = Vec::with_capacity(paths.len());
    for p in &paths {
        o.inputs.push(p.clone());
        models.push(NamModel::load(p)?);
    }
    let q = models[0].q();
    if models.iter().any(|m| m.q() != q) {
        return Err(Error::config("models disagree on the number of covariates"));
    }
    let grids = (0..q)
        .map(|k| {
            let b = models[0].subnets()[k].bounds;
            CurveGrid::new(k, a.x_min.unwrap_or(b.lo), a.x_max.unwrap_or(b.hi), a.grid_points)
        })
        .collect::<Result<Vec<_>>>()?;
    let opts = GprOptions {
        length_scale: a.length_scale,
        kernel: a.kernel,
        jitter: a.jitter,
        prior_mean: PriorMean::ObservationMean,
    };
    let fits = fit_curves(&models, &grids, &opts)?;
    prepare_out(&a.out)?;
    for (k, (ens, fit)) in fits.iter().enumerate() {
        write_file(&a.out, &format!("curves_k{k}.csv"), &mut o, |w| write_curves_csv(w, ens, fit))?;
    }
    Ok(o)
}

fn score(a: &ScoreArgs) -> Result<Outcome> {
    let mut o = Outcome::default();
    let ds = load_pairs(&a.pairs, &mut o)?;
    o.inputs.push(a.model.clone());
    let model = NamModel::load(&a.model)?;
    o.inputs.push(a.truth.clone());
    let truth = TruthFile::from_json(&read_text(&a.truth)?).map_err(|e| with_path(&a.truth, e))?;
    let mut fits = Vec::new();
    if let Some(dir) = &a.curves {
        for k in 0..truth.truth.q() {
            let p = dir.join(format!("curves_k{k}.csv"));
            if p.exists() {
                o.inputs.push(p.clone());
                fits.push(read_curves_csv(open(&p)?, k, f64::NAN).map_err(|e| with_path(&p, e))?);
            }
        }
    }
    let report = ScoreReport::compute(&model, &truth.truth, &ds, &fits)?;
    prepare_out(&a.out)?;
    write_file(&a.out, "report.json", &mut o, |w| write_json(w, &report))?;
    Ok(o)
}

fn bench(a: &BenchArgs) -> Result<Outcome> {
    let mut o = Outcome::default();
    let cfg = BenchConfig {
        events: a.events,
        nodes: a.nodes,
        spec: SubnetSpec::parse_arch(&a.arch, 0.0)?,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    let rows = bench_scaling(&a.qs, &cfg)?;
    prepare_out(&a.out)?;
    write_file(&a.out, "bench.csv", &mut o, |w| write_bench_csv(w, &rows))?;
    Ok(o)
}
