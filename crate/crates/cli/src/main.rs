//! `qwalk`: generate graphs, label them by walker hitting times, build
//! datasets, and train and evaluate classifiers.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qwalk_core::dataset::ClassPair;
use qwalk_core::graphs::Family;
use qwalk_core::neuralnet::{Arch, Optimizer};
use qwalk_core::pipeline::PruneScope;
use qwalk_core::walksim::QuantumEngine;

use config::SizeList;

#[derive(Debug, Parser)]
#[command(name = "qwalk", version, about = "Quantum vs classical walk hitting-time classification")]
struct Cli {
    /// `key = value` config file, or a manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`, or $QWALK_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enumerate line/cycle graphs or sample random ones.
    Generate(GenerateArgs),
    /// Simulate both walkers of a class pair on each graph and label it.
    Simulate(SimulateArgs),
    /// Balance, prune, augment and split labeled samples.
    Dataset(DatasetArgs),
    /// Train a classifier on the train split.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Evaluate(EvaluateArgs),
    /// Train on one graph size and test on several.
    Sweep(SweepArgs),
    /// Principal components of the adjacency matrices.
    Pca(PcaArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Number of random graphs.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    p_edge: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    pair: Option<ClassPair>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Fixed threshold instead of 1/ln n.
    #[arg(long)]
    p_th: Option<f64>,
    /// `effective` or `lindblad`.
    #[arg(long)]
    engine: Option<QuantumEngine>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Graph file written by `generate`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write per-graph arrival-probability CSVs.
    #[arg(long)]
    trajectories: bool,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Sample file written by `simulate`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    no_balance: bool,
    /// Drop samples whose step difference is at most K.
    #[arg(long, value_name = "K")]
    drop_minor: Option<u64>,
    /// Drop samples whose step difference is at least K.
    #[arg(long, value_name = "K")]
    drop_major: Option<u64>,
    /// Prune the whole set (`all`) or the train split only (`train`).
    #[arg(long)]
    prune_scope: Option<PruneScope>,
    /// Shuffled copies added per sample.
    #[arg(long, value_name = "COPIES")]
    augment: Option<usize>,
    /// Train fraction.
    #[arg(long, value_name = "FRACTION")]
    split: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Histogram bin width in time steps.
    #[arg(long)]
    hist_bin: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainConfigArgs {
    #[arg(long)]
    arch: Option<Arch>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// `sgd` or `adam`.
    #[arg(long)]
    optimizer: Option<Optimizer>,
    #[arg(long)]
    seed: Option<u64>,
    /// Independent runs with seeds `seed..seed+repeats`.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Split dataset written by `dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    train: TrainConfigArgs,
    /// Network input size; graphs are zero-padded to it.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// `test`, `train` or `all`; defaults to `test` for split datasets.
    #[arg(long)]
    subset: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Evaluate this checkpoint instead of training one.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_sizes: Option<SizeList>,
    /// Random graphs per size.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    p_edge: Option<f64>,
    /// Shuffled copies of each training graph.
    #[arg(long, value_name = "COPIES")]
    augment: Option<usize>,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    train: TrainConfigArgs,
}

#[derive(Debug, Args)]
struct PcaArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Expected graph size; checked against the dataset header.
    #[arg(long)]
    nodes: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
