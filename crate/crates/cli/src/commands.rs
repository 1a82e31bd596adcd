use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use qwalk_core::analysis::{export_projection, logistic_separability, pca};
use qwalk_core::dataset::{
    augment_by_shuffle, diff_histogram, ClassPair, Dataset, DatasetHeader, LabelConfig, PruneMode,
};
use qwalk_core::graphs::{Family, Graph, GraphJson, DEFAULT_EDGE_PROBABILITY};
use qwalk_core::neuralnet::{
    build_model, evaluate, generalization_sweep, mean_std, train, train_repeats, Arch, Checkpoint,
    EvalReport, Examples, Optimizer, SweepPoint, TrainConfig,
};
use qwalk_core::pipeline::{
    build_dataset, generate_graphs, label_graphs, prepare_dataset, DatasetRecipe, GenerateSpec,
    PruneScope,
};
use qwalk_core::rng::derive_seed;
use qwalk_core::walksim::{simulate, QuantumEngine, SimConfig, DEFAULT_DT, DEFAULT_GAMMA, DEFAULT_T_MAX};

use crate::config::{Settings, SizeList};
use crate::manifest::Run;
use crate::{
    Cli, Command, DatasetArgs, EvaluateArgs, GenerateArgs, PcaArgs, SimArgs, SimulateArgs, SweepArgs,
    TrainArgs, TrainConfigArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let mut s = Settings::load(cli.config.as_deref())?;
    let jobs = s.get("jobs", cli.jobs, 0usize)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .context("cannot start worker pool")?;
    let out_dir = s.out_dir(cli.out_dir)?;
    let (name, (summary, run)) = match cli.command {
        Command::Generate(a) => ("generate", generate(a, &mut s, &out_dir)?),
        Command::Simulate(a) => ("simulate", simulate_cmd(a, &mut s, &out_dir)?),
        Command::Dataset(a) => ("dataset", dataset(a, &mut s, &out_dir)?),
        Command::Train(a) => ("train", train_cmd(a, &mut s, &out_dir)?),
        Command::Evaluate(a) => ("evaluate", evaluate_cmd(a, &mut s, &out_dir)?),
        Command::Sweep(a) => ("sweep", sweep(a, &mut s, &out_dir)?),
        Command::Pca(a) => ("pca", pca_cmd(a, &mut s, &out_dir)?),
    };
    for key in s.unused() {
        eprintln!("warning: config key `{key}` is not used by `{name}`");
    }
    let path = run.finish(name, s.resolved().clone(), summary)?;
    eprintln!("manifest: {}", path.display());
    Ok(())
}

type Outcome = (serde_json::Value, Run);

/// `SOURCE_DATE_EPOCH` when set, otherwise 0, so reruns are byte-identical.
fn generated_at() -> Result<u64> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v.trim().parse().with_context(|| format!("SOURCE_DATE_EPOCH `{v}` is not an integer")),
        Err(_) => Ok(0),
    }
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, &it)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn dataset_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    ds.write_jsonl(&mut buf)?;
    Ok(buf)
}

fn read_graphs(path: &Path) -> Result<Vec<Graph>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let j: GraphJson = serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1))?;
            Graph::try_from(j).with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

fn read_dataset(path: &Path, run: &mut Run) -> Result<Dataset> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let ds = Dataset::read_jsonl(BufReader::new(file)).with_context(|| format!("cannot parse {}", path.display()))?;
    run.input(path)?;
    Ok(ds)
}

fn generate(a: GenerateArgs, s: &mut Settings, out: &Path) -> Result<Outcome> {
    let spec = GenerateSpec {
        family: s.get("family", a.family, Family::Random)?,
        n: s.required("nodes", a.nodes)?,
        count: s.get("count", a.count, 1000)?,
        p_edge: s.get("p-edge", a.p_edge, DEFAULT_EDGE_PROBABILITY)?,
        seed: s.get("seed", a.seed, 0)?,
    };
    let graphs = generate_graphs(&spec)
        .with_context(|| format!("cannot generate {} graphs on {} nodes", spec.family, spec.n))?;
    let mut run = Run::new(out.to_path_buf())?;
    run.seeds.push(spec.seed);
    run.write("graphs.jsonl", &jsonl(graphs.iter().map(GraphJson::from))?)?;
    println!("{} {} graphs on {} nodes", graphs.len(), spec.family, spec.n);
    Ok((json!({ "graphs": graphs.len() }), run))
}

fn label_config(a: SimArgs, s: &mut Settings) -> Result<(ClassPair, LabelConfig)> {
    let pair = s.get("pair", a.pair, ClassPair::ClassicalVsQuantum)?;
    let cfg = LabelConfig {
        sim: SimConfig {
            dt: s.get("dt", a.dt, DEFAULT_DT)?,
            t_max: s.get("t-max", a.t_max, DEFAULT_T_MAX)?,
            gamma: s.get("gamma", a.gamma, DEFAULT_GAMMA)?,
            engine: s.get("engine", a.engine, QuantumEngine::Effective)?,
            ..LabelConfig::default().sim
        },
        p_th: s.opt("p-th", a.p_th)?,
    };
    cfg.sim.validate()?;
    if let Some(p) = cfg.p_th {
        cfg.threshold(3).with_context(|| format!("bad --p-th {p}"))?;
    }
    Ok((pair, cfg))
}

fn simulate_cmd(a: SimulateArgs, s: &mut Settings, out: &Path) -> Result<Outcome> {
    let input: PathBuf = s.required("input", a.input)?;
    let (pair, cfg) = label_config(a.sim, s)?;
    let seed = s.get("seed", a.seed, 0)?;
    let trajectories = s.get("trajectories", a.trajectories.then_some(true), false)?;
    let graphs = read_graphs(&input)?;
    let n = graphs.iter().map(Graph::n).max().ok_or_else(|| anyhow!("{} has no graphs", input.display()))?;
    let mut run = Run::new(out.to_path_buf())?;
    run.input(&input)?;
    run.seeds.push(seed);

    let labels = label_graphs(&graphs, pair, &cfg, seed);
    for (i, msg) in &labels.failures {
        eprintln!("warning: graph {i} failed: {msg}");
    }
    let mut header = DatasetHeader::new(pair, n, &cfg, vec![seed])?;
    header.generated_at = generated_at()?;
    let ds = Dataset::new(header, labels.samples);
    run.write("samples.jsonl", &dataset_bytes(&ds)?)?;

    let mut trajectory_failures = 0;
    if trajectories {
        let full = SimConfig {
            stop_on_hit: false,
            ..cfg.sim
        };
        let (wa, wb) = pair.walkers();
        let files: Vec<_> = graphs
            .par_iter()
            .enumerate()
            .flat_map_iter(|(i, g)| {
                [wa, wb].into_iter().map(move |w| {
                    let r = cfg.threshold(g.n()).and_then(|p| simulate(g, w, &full, p));
                    (format!("trajectories/graph-{i:05}-{w}.csv"), r.map(|r| r.to_csv()))
                })
            })
            .collect();
        for (name, r) in files {
            match r {
                Ok(csv) => {
                    run.write(&name, csv.as_bytes())?;
                }
                Err(e) => {
                    eprintln!("warning: {name}: {e}");
                    trajectory_failures += 1;
                }
            }
        }
    }
    let counts = ds.class_counts();
    println!(
        "{} samples ({} / {}), {} dropped ties, {} failures",
        ds.len(),
        counts[0],
        counts[1],
        labels.dropped,
        labels.failures.len()
    );
    let failed: Vec<usize> = labels.failures.iter().map(|f| f.0).collect();
    Ok((
        json!({
            "graphs": graphs.len(),
            "samples": ds.len(),
            "class_counts": counts,
            "class_names": pair.class_names(),
            "dropped": labels.dropped,
            "failures": failed.len(),
            "failed_graphs": failed,
            "trajectory_failures": trajectory_failures,
        }),
        run,
    ))
}

fn dataset(a: DatasetArgs, s: &mut Settings, out: &Path) -> Result<Outcome> {
    let input: PathBuf = s.required("input", a.input)?;
    let balance = s.get("balance", a.no_balance.then_some(false), true)?;
    let minor = s.opt("drop-minor", a.drop_minor)?;
    let major = s.opt("drop-major", a.drop_major)?;
    let prune = match (minor, major) {
        (Some(_), Some(_)) => bail!("--drop-minor and --drop-major are mutually exclusive"),
        (Some(k), None) => Some((PruneMode::DropMinor, k)),
        (None, Some(k)) => Some((PruneMode::DropMajor, k)),
        (None, None) => None,
    };
    let recipe = DatasetRecipe {
        balance,
        prune,
        prune_scope: s.get("prune-scope", a.prune_scope, PruneScope::All)?,
        augment_copies: s.get("augment", a.augment, 0)?,
        train_fraction: s.get("split", a.split, 0.8)?,
        seed: s.get("seed", a.seed, 0)?,
    };
    let bin = s.get("hist-bin", a.hist_bin, 10)?;
    let mut run = Run::new(out.to_path_buf())?;
    let raw = read_dataset(&input, &mut run)?;
    run.seeds.push(recipe.seed);
    let ds = prepare_dataset(&raw, &recipe).context("cannot prepare dataset")?;
    let (train, test) = (ds.train().expect("split"), ds.test().expect("split"));
    run.write("dataset.jsonl", &dataset_bytes(&ds)?)?;
    run.write("train.jsonl", &dataset_bytes(&train)?)?;
    run.write("test.jsonl", &dataset_bytes(&test)?)?;
    run.write("histogram.csv", diff_histogram(&raw, bin)?.to_csv().as_bytes())?;
    println!(
        "{} samples: train {} {:?}, test {} {:?}",
        ds.len(),
        train.len(),
        train.class_counts(),
        test.len(),
        test.class_counts()
    );
    Ok((
        json!({
            "input_samples": raw.len(),
            "input_class_counts": raw.class_counts(),
            "samples": ds.len(),
            "class_counts": ds.class_counts(),
            "train": train.len(),
            "train_class_counts": train.class_counts(),
            "test": test.len(),
            "test_class_counts": test.class_counts(),
        }),
        run,
    ))
}

struct TrainSettings {
    arch: Arch,
    cfg: TrainConfig,
    repeats: usize,
}

fn train_settings(a: TrainConfigArgs, s: &mut Settings) -> Result<TrainSettings> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: s.get("lr", a.lr, d.learning_rate)?,
        batch_size: s.get("batch-size", a.batch_size, d.batch_size)?,
        epochs: s.get("epochs", a.epochs, d.epochs)?,
        optimizer: s.get("optimizer", a.optimizer, Optimizer::Sgd)?,
        rng_seed: s.get("seed", a.seed, 0)?,
    };
    cfg.validate()?;
    let repeats = s.get("repeats", a.repeats, 1)?;
    if repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    Ok(TrainSettings {
        arch: s.get("arch", a.arch, Arch::Fc)?,
        cfg,
        repeats,
    })
}

fn checkpoint_bytes(ck: &Checkpoint) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec(ck)?)
}

fn train_cmd(a: TrainArgs, s: &mut Settings, out: &Path) -> Result<Outcome> {
    let path: PathBuf = s.required("dataset", a.dataset)?;
    let t = train_settings(a.train, s)?;
    let dim = s.opt("dim", a.dim)?;
    let mut run = Run::new(out.to_path_buf())?;
    let ds = read_dataset(&path, &mut run)?;
    let (Some(tr), Some(te)) = (ds.train(), ds.test()) else {
        bail!("{} has no train/test split; run `qwalk dataset` first", path.display());
    };
    let dim = dim.unwrap_or(ds.header.n.max(t.arch.min_input()));
    let tr = Examples::from_dataset(&tr, dim)?;
    let te = Examples::from_dataset(&te, dim)?;
    run.seeds.extend((0..t.repeats as u64).map(|r| t.cfg.rng_seed + r));
    let summary = train_repeats(t.arch, dim, &tr, &te, &t.cfg, t.repeats, true)
        .with_context(|| format!("training {} on {}", t.arch, path.display()))?;
    let first = &summary.runs[0];
    let ck = Checkpoint::new(
        first.model.clone().expect("models kept"),
        json!({ "seed": first.seed, "train": t.cfg, "test_accuracy": first.report.accuracy }),
    );
    run.write("model.json", &checkpoint_bytes(&ck)?)?;
    run.write_json("report.json", &summary)?;
    run.write("curves.csv", summary.curves_csv().as_bytes())?;
    println!(
        "{} on {} (dim {dim}): test accuracy {:.4} +- {:.4} over {} run(s)",
        t.arch,
        path.display(),
        summary.accuracy_mean,
        summary.accuracy_std,
        t.repeats
    );
    Ok((
        json!({
            "arch": t.arch,
            "input_dim": dim,
            "accuracy_mean": summary.accuracy_mean,
            "accuracy_std": summary.accuracy_std,
            "accuracies": summary.accuracies(),
        }),
        run,
    ))
}

fn evaluate_cmd(a: EvaluateArgs, s: &mut Settings, out: &Path) -> Result<Outcome> {
    let model_path: PathBuf = s.required("model", a.model)?;
    let data_path: PathBuf = s.required("dataset", a.dataset)?;
    let subset = s.get("subset", a.subset, "auto".to_string())?;
    let mut run = Run::new(out.to_path_buf())?;
    let ck = Checkpoint::load(&model_path).with_context(|| format!("cannot load {}", model_path.display()))?;
    run.input(&model_path)?;
    let ds = read_dataset(&data_path, &mut run)?;
    let chosen = match (subset.as_str(), ds.split().is_some()) {
        ("auto", true) | ("test", true) => ds.test().expect("split"),
        ("train", true) => ds.train().expect("split"),
        ("auto", false) | ("all", _) => ds,
        ("test" | "train", false) => bail!("{} has no split; use --subset all", data_path.display()),
        (other, _) => bail!("unknown subset `{other}` (expected test, train or all)"),
    };
    let ex = Examples::from_dataset(&chosen, ck.model.input_dim)
        .with_context(|| format!("dataset does not fit model input {}", ck.model.input_dim))?;
    let report = evaluate(&ck.model, &ex)?;
    run.write_json("evaluation.json", &report)?;
    print_report(&report);
    Ok((
        json!({ "samples": report.n_samples, "accuracy": report.accuracy, "loss": report.loss }),
        run,
    ))
}

fn print_report(r: &EvalReport) {
    println!("accuracy {:.4}  loss {:.4}  ({} samples)", r.accuracy, r.loss, r.n_samples);
    for c in 0..2 {
        println!(
            "class {c}: precision {:.4} recall {:.4} f1 {:.4}",
            r.precision[c], r.recall[c], r.f1[c]
        );
    }
}

fn sweep(a: SweepArgs, s: &mut Settings, out: &Path) -> Result<Outcome> {
    let model_path = s.opt::<PathBuf>("model", a.model)?;
    let family = s.get("family", a.family, Family::Cycle)?;
    let train_size = s.get("train-size", a.train_size, 6)?;
    let default_sizes = SizeList((train_size..=train_size + 4).collect());
    let sizes = s.get("test-sizes", a.test_sizes, default_sizes)?.0;
    let count = s.get("count", a.count, 1000)?;
    let p_edge = s.get("p-edge", a.p_edge, DEFAULT_EDGE_PROBABILITY)?;
    let copies = s.get("augment", a.augment, 20)?;
    let (pair, cfg) = label_config(a.sim, s)?;
    let t = train_settings(a.train, s)?;
    let seed = t.cfg.rng_seed;
    let mut run = Run::new(out.to_path_buf())?;

    let when = generated_at()?;
    let labeled = |n: usize| -> Result<Dataset> {
        let spec = GenerateSpec {
            family,
            n,
            count,
            p_edge,
            seed: derive_seed(seed, n as u64),
        };
        let graphs = generate_graphs(&spec).with_context(|| format!("cannot generate {family} graphs on {n} nodes"))?;
        let (ds, labels) = build_dataset(&graphs, pair, &cfg, spec.seed, when)?;
        for (i, msg) in &labels.failures {
            eprintln!("warning: {n}-node graph {i} failed: {msg}");
        }
        Ok(ds)
    };
    let sets = sizes.iter().map(|&n| labeled(n)).collect::<Result<Vec<_>>>()?;

    let models = match &model_path {
        Some(p) => {
            run.input(p)?;
            vec![(seed, Checkpoint::load(p).with_context(|| format!("cannot load {}", p.display()))?.model)]
        }
        None => {
            let dim = sizes.iter().copied().max().unwrap_or(0).max(train_size).max(t.arch.min_input());
            let base = match sizes.iter().position(|&n| n == train_size) {
                Some(i) => sets[i].clone(),
                None => labeled(train_size)?,
            };
            (0..t.repeats as u64)
                .into_par_iter()
                .map(|r| {
                    let run_seed = seed + r;
                    let data = if copies > 0 {
                        augment_by_shuffle(&base, copies, derive_seed(run_seed, 2))?
                    } else {
                        base.clone()
                    };
                    let ex = Examples::from_dataset(&data, dim)?;
                    let model = build_model(t.arch, dim, derive_seed(run_seed, 0))?;
                    let cfg = TrainConfig {
                        rng_seed: derive_seed(run_seed, 1),
                        ..t.cfg
                    };
                    Ok((run_seed, train(model, &ex, None, &cfg)?.model))
                })
                .collect::<qwalk_core::Result<Vec<_>>>()?
        }
    };
    run.seeds.extend(models.iter().map(|m| m.0));

    let mut per_seed = Vec::new();
    for (sd, m) in &models {
        per_seed.push((*sd, generalization_sweep(m, &sets)?));
    }
    let mut csv = String::from("size,accuracy_mean,accuracy_std,loss_mean,samples\n");
    let mut rows = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let accs: Vec<f64> = per_seed.iter().map(|(_, p)| p[i].report.accuracy).collect();
        let losses: Vec<f64> = per_seed.iter().map(|(_, p)| p[i].report.loss).collect();
        let (acc, sd) = mean_std(&accs);
        let loss = mean_std(&losses).0;
        csv.push_str(&format!("{n},{acc},{sd},{loss},{}\n", sets[i].len()));
        println!("size {n}: accuracy {acc:.4} +- {sd:.4} ({} graphs)", sets[i].len());
        rows.push(json!({ "size": n, "accuracy_mean": acc, "accuracy_std": sd, "loss_mean": loss }));
    }
    run.write("sweep.csv", csv.as_bytes())?;
    let detail: Vec<_> = per_seed
        .iter()
        .map(|(sd, p)| json!({ "seed": sd, "points": p as &Vec<SweepPoint> }))
        .collect();
    run.write_json("sweep.json", &detail)?;
    if model_path.is_none() {
        let ck = Checkpoint::new(models[0].1.clone(), json!({ "seed": models[0].0, "train_size": train_size }));
        run.write("model.json", &checkpoint_bytes(&ck)?)?;
    }
    Ok((json!({ "points": rows }), run))
}

fn pca_cmd(a: PcaArgs, s: &mut Settings, out: &Path) -> Result<Outcome> {
    let path: PathBuf = s.required("dataset", a.dataset)?;
    let k = s.get("k", a.k, 2)?;
    let nodes = s.opt("nodes", a.nodes)?;
    let mut run = Run::new(out.to_path_buf())?;
    let ds = read_dataset(&path, &mut run)?;
    if let Some(n) = nodes {
        if n != ds.header.n {
            bail!("{} holds {}-node graphs, not {n}", path.display(), ds.header.n);
        }
    }
    let r = pca(&ds, k).context("PCA failed")?;
    let separability = logistic_separability(&r.projected, &r.labels, 500);
    run.write("projection.csv", export_projection(&r).as_bytes())?;
    let summary = r.summary();
    run.write_json("pca.json", &json!({ "summary": summary, "logistic_accuracy": separability }))?;
    println!(
        "explained variance ratio {:?}, logistic accuracy on {k} components {separability:.4}",
        summary.explained_ratio
    );
    Ok((json!({ "explained_ratio": summary.explained_ratio, "logistic_accuracy": separability }), run))
}
