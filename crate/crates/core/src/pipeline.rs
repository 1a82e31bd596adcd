//! End-to-end steps shared by the command-line tool and the test suites:
//! graph generation, parallel labeling and dataset preparation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    augment_by_shuffle, balance, label_sample, prune_by_diff, split, ClassPair, Dataset,
    DatasetHeader, LabelConfig, LabeledSample, PruneMode, Split,
};
use crate::error::{Error, Result};
use crate::graphs::{
    enumerate_cycle_graphs, enumerate_line_graphs, random_graph, Family, Graph,
    DEFAULT_EDGE_PROBABILITY,
};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub family: Family,
    pub n: usize,
    /// Number of random graphs; ignored for the enumerated families.
    pub count: usize,
    pub p_edge: f64,
    pub seed: u64,
}

impl GenerateSpec {
    pub fn random(n: usize, count: usize, seed: u64) -> Self {
        GenerateSpec {
            family: Family::Random,
            n,
            count,
            p_edge: DEFAULT_EDGE_PROBABILITY,
            seed,
        }
    }
}

/// Line and cycle graphs are enumerated exhaustively; random graph `i` is
/// drawn from the stream `derive_seed(seed, i)`, so output does not depend on
/// the number of worker threads.
pub fn generate_graphs(spec: &GenerateSpec) -> Result<Vec<Graph>> {
    match spec.family {
        Family::Line => enumerate_line_graphs(spec.n),
        Family::Cycle => enumerate_cycle_graphs(spec.n),
        Family::Random => (0..spec.count as u64)
            .into_par_iter()
            .map(|i| random_graph(spec.n, spec.p_edge, derive_seed(spec.seed, i)))
            .collect(),
    }
}

/// Outcome of labeling a batch of graphs.
#[derive(Debug, Clone)]
pub struct LabelRun {
    pub samples: Vec<LabeledSample>,
    /// Quantum-vs-quantum ties without a ground-truth label.
    pub dropped: usize,
    /// `(graph index, error message)` for graphs whose simulation failed.
    pub failures: Vec<(usize, String)>,
}

/// Simulates both walkers on every graph in parallel. Sample order and
/// `graph_id` follow the input order.
pub fn label_graphs(graphs: &[Graph], pair: ClassPair, cfg: &LabelConfig, seed: u64) -> LabelRun {
    let results: Vec<Result<Option<LabeledSample>>> = graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| label_sample(g, pair, cfg, i as u64, seed))
        .collect();
    let mut run = LabelRun {
        samples: Vec::new(),
        dropped: 0,
        failures: Vec::new(),
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(Some(s)) => run.samples.push(s),
            Ok(None) => run.dropped += 1,
            Err(e) => run.failures.push((i, e.to_string())),
        }
    }
    run
}

/// Labels `graphs` into a dataset whose header records the configuration.
pub fn build_dataset(
    graphs: &[Graph],
    pair: ClassPair,
    cfg: &LabelConfig,
    seed: u64,
    generated_at: u64,
) -> Result<(Dataset, LabelRun)> {
    let n = graphs
        .iter()
        .map(Graph::n)
        .max()
        .ok_or_else(|| Error::InvalidArgument("no graphs to label".into()))?;
    let mut run = label_graphs(graphs, pair, cfg, seed);
    let mut header = DatasetHeader::new(pair, n, cfg, vec![seed])?;
    header.generated_at = generated_at;
    let ds = Dataset::new(header, std::mem::take(&mut run.samples));
    Ok((ds, run))
}

/// Whether pruning applies to the whole dataset before splitting or only to
/// the training part after splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneScope {
    #[default]
    All,
    Train,
}

impl std::str::FromStr for PruneScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(PruneScope::All),
            "train" => Ok(PruneScope::Train),
            _ => Err(Error::Parse(format!("unknown prune scope `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecipe {
    pub balance: bool,
    pub prune: Option<(PruneMode, u64)>,
    pub prune_scope: PruneScope,
    pub augment_copies: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetRecipe {
    fn default() -> Self {
        DatasetRecipe {
            balance: true,
            prune: None,
            prune_scope: PruneScope::All,
            augment_copies: 0,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Balance, prune, augment and split, in that order. With
/// [`PruneScope::Train`] pruning happens after the split and removes samples
/// from the training indices only.
pub fn prepare_dataset(ds: &Dataset, recipe: &DatasetRecipe) -> Result<Dataset> {
    let mut out = if recipe.balance {
        balance(ds, derive_seed(recipe.seed, 0))?
    } else {
        ds.clone()
    };
    if let (Some((mode, k)), PruneScope::All) = (recipe.prune, recipe.prune_scope) {
        out = prune_by_diff(&out, mode, k);
    }
    if recipe.augment_copies > 0 {
        out = augment_by_shuffle(&out, recipe.augment_copies, derive_seed(recipe.seed, 1))?;
    }
    out = split(&out, recipe.train_fraction, derive_seed(recipe.seed, 2))?;
    if let (Some((mode, k)), PruneScope::Train) = (recipe.prune, recipe.prune_scope) {
        let Split { train, test } = out.header.split.take().expect("split was just set");
        let train = train.into_iter().filter(|&i| mode.keeps(&out.samples[i], k)).collect();
        out.header.split = Some(Split { train, test });
    }
    Ok(out)
}
