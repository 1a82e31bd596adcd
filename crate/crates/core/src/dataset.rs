//! Labeled samples and the dataset operations applied before training:
//! balancing, pruning by hitting-time difference, shuffle augmentation and
//! stratified splitting. Datasets are stored as JSON lines with a header.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{random_tail_permutation, AdjacencyMatrix, Family, Graph};
use crate::rng::{derive_seed, rng_from_seed};
use crate::walksim::{simulate, threshold_for, HitSteps, SimConfig, WalkerKind};

pub use crate::walksim::WalkerKind as WalkerSpec;

pub const FORMAT_VERSION: u32 = 1;

/// The two walkers compared in a dataset, as `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassPair {
    #[serde(rename = "classical-vs-quantum")]
    ClassicalVsQuantum,
    #[serde(rename = "classical-vs-quantumT")]
    ClassicalVsQuantumT,
    #[serde(rename = "quantum-vs-quantumT")]
    QuantumVsQuantumT,
}

impl ClassPair {
    pub const ALL: [ClassPair; 3] = [
        ClassPair::ClassicalVsQuantum,
        ClassPair::ClassicalVsQuantumT,
        ClassPair::QuantumVsQuantumT,
    ];

    pub fn walkers(self) -> (WalkerKind, WalkerKind) {
        match self {
            ClassPair::ClassicalVsQuantum => (WalkerKind::Classical, WalkerKind::Quantum),
            ClassPair::ClassicalVsQuantumT => (WalkerKind::Classical, WalkerKind::QuantumT),
            ClassPair::QuantumVsQuantumT => (WalkerKind::Quantum, WalkerKind::QuantumT),
        }
    }

    /// Human-readable class names for labels 0 and 1.
    pub fn class_names(self) -> [&'static str; 2] {
        match self {
            ClassPair::ClassicalVsQuantum => ["classical_faster", "quantum_faster"],
            ClassPair::ClassicalVsQuantumT => ["classical_faster", "quantum_t_faster"],
            ClassPair::QuantumVsQuantumT => ["quantum_faster", "quantum_t_faster"],
        }
    }
}

impl fmt::Display for ClassPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassPair::ClassicalVsQuantum => "classical-vs-quantum",
            ClassPair::ClassicalVsQuantumT => "classical-vs-quantumT",
            ClassPair::QuantumVsQuantumT => "quantum-vs-quantumT",
        })
    }
}

impl FromStr for ClassPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassPair::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown class pair `{s}`")))
    }
}

/// Class index: 0 when walker `a` wins (including ties for a classical `a`),
/// 1 when walker `b` is strictly faster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    A = 0,
    B = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Label> {
        match i {
            0 => Ok(Label::A),
            1 => Ok(Label::B),
            _ => Err(Error::Parse(format!("label must be 0 or 1, got {i}"))),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Label::from_index(u8::deserialize(d)? as usize).map_err(serde::de::Error::custom)
    }
}

/// `tau_a - tau_b` in grid steps. Positive means walker `a` is slower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepDiff {
    Finite(i64),
    /// At least one walker never reached the threshold. `sign` is +1 when
    /// only `a` failed, -1 when only `b` failed and 0 when both failed.
    Infinite { sign: i8 },
}

impl StepDiff {
    pub fn between(tau_a: HitSteps, tau_b: HitSteps) -> StepDiff {
        match (tau_a, tau_b) {
            (HitSteps::Finite(a), HitSteps::Finite(b)) => StepDiff::Finite(a as i64 - b as i64),
            (HitSteps::Infinite, HitSteps::Finite(_)) => StepDiff::Infinite { sign: 1 },
            (HitSteps::Finite(_), HitSteps::Infinite) => StepDiff::Infinite { sign: -1 },
            (HitSteps::Infinite, HitSteps::Infinite) => StepDiff::Infinite { sign: 0 },
        }
    }

    /// `|diff|`, `None` when infinite.
    pub fn magnitude(self) -> Option<u64> {
        match self {
            StepDiff::Finite(d) => Some(d.unsigned_abs()),
            StepDiff::Infinite { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub family: Family,
    /// Node count of the base graph, i.e. the size of the unpadded block.
    pub n: usize,
    /// Source-graph identifier shared by all augmented copies.
    pub graph_id: u64,
    pub seed: u64,
    pub gamma: f64,
    pub dt: f64,
    pub p_th: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    #[serde(rename = "adj")]
    pub adjacency: AdjacencyMatrix,
    pub label: Label,
    #[serde(rename = "tau_a_steps")]
    pub tau_a: HitSteps,
    #[serde(rename = "tau_b_steps")]
    pub tau_b: HitSteps,
    pub meta: SampleMeta,
}

impl LabeledSample {
    pub fn step_diff(&self) -> StepDiff {
        StepDiff::between(self.tau_a, self.tau_b)
    }

    pub fn graph(&self) -> Result<Graph> {
        Graph::from_adjacency(&self.adjacency, self.meta.n, self.meta.family)
    }
}

/// Simulation settings plus an optional fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub sim: SimConfig,
    /// Overrides `1 / ln n` when set.
    pub p_th: Option<f64>,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            sim: SimConfig {
                stop_on_hit: true,
                ..SimConfig::default()
            },
            p_th: None,
        }
    }
}

impl LabelConfig {
    pub fn threshold(&self, n: usize) -> Result<f64> {
        match self.p_th {
            Some(p) if p > 0.0 && p < 1.0 => Ok(p),
            Some(p) => Err(Error::InvalidArgument(format!("threshold {p} outside (0, 1)"))),
            None => threshold_for(n),
        }
    }
}

/// Simulates both walkers of `pair` on `g` and labels the graph by which one
/// is strictly faster. Returns `None` for quantum-vs-quantum ties, which have
/// no ground truth.
pub fn label_sample(
    g: &Graph,
    pair: ClassPair,
    cfg: &LabelConfig,
    graph_id: u64,
    seed: u64,
) -> Result<Option<LabeledSample>> {
    let p_th = cfg.threshold(g.n())?;
    let (wa, wb) = pair.walkers();
    let tau_a = simulate(g, wa, &cfg.sim, p_th)?.hitting;
    let tau_b = simulate(g, wb, &cfg.sim, p_th)?.hitting;
    let label = if tau_b < tau_a {
        Label::B
    } else if tau_a < tau_b || wa == WalkerKind::Classical {
        Label::A
    } else {
        return Ok(None);
    };
    Ok(Some(LabeledSample {
        adjacency: g.adjacency(),
        label,
        tau_a,
        tau_b,
        meta: SampleMeta {
            family: g.family(),
            n: g.n(),
            graph_id,
            seed,
            gamma: cfg.sim.gamma,
            dt: cfg.sim.dt,
            p_th,
        },
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub class_pair: ClassPair,
    pub n: usize,
    pub gamma: f64,
    pub dt: f64,
    pub t_max: f64,
    pub p_th: f64,
    pub seeds: Vec<u64>,
    /// Seconds since the Unix epoch, 0 when not recorded.
    pub generated_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl DatasetHeader {
    pub fn new(class_pair: ClassPair, n: usize, cfg: &LabelConfig, seeds: Vec<u64>) -> Result<Self> {
        Ok(DatasetHeader {
            format_version: FORMAT_VERSION,
            class_pair,
            n,
            gamma: cfg.sim.gamma,
            dt: cfg.sim.dt,
            t_max: cfg.sim.t_max,
            p_th: cfg.threshold(n)?,
            seeds,
            generated_at: 0,
            split: None,
        })
    }
}

/// Train/test partition as sorted sample indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(header: DatasetHeader, samples: Vec<LabeledSample>) -> Self {
        Dataset { header, samples }
    }

    pub fn class_pair(&self) -> ClassPair {
        self.header.class_pair
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self) -> Option<&Split> {
        self.header.split.as_ref()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for s in &self.samples {
            c[s.label.index()] += 1;
        }
        c
    }

    /// New dataset holding the samples at `indices`, without split.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut header = self.header.clone();
        header.split = None;
        Dataset {
            header,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn train(&self) -> Option<Dataset> {
        self.split().map(|s| self.subset(&s.train))
    }

    pub fn test(&self) -> Option<Dataset> {
        self.split().map(|s| self.subset(&s.test))
    }

    fn with_samples(&self, samples: Vec<LabeledSample>) -> Dataset {
        let mut header = self.header.clone();
        header.split = None;
        Dataset { header, samples }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct HeaderLine<'a> {
            header: &'a DatasetHeader,
        }
        serde_json::to_writer(&mut w, &HeaderLine { header: &self.header })?;
        w.write_all(b"\n")?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Dataset> {
        #[derive(Deserialize)]
        struct HeaderLine {
            header: DatasetHeader,
        }
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let header: HeaderLine = serde_json::from_str(&first)
            .map_err(|e| Error::Parse(format!("bad dataset header: {e}")))?;
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            samples.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::Parse(format!("sample line {}: {e}", i + 2)))?,
            );
        }
        let ds = Dataset {
            header: header.header,
            samples,
        };
        if let Some(split) = ds.split() {
            let n = ds.len();
            if split.train.iter().chain(&split.test).any(|&i| i >= n) {
                return Err(Error::Parse("split index out of range".into()));
            }
        }
        Ok(ds)
    }

    /// Flattened adjacency entries followed by the label, one row per sample.
    pub fn to_csv(&self) -> String {
        let dim = self.samples.first().map_or(0, |s| s.adjacency.dim());
        let mut out: String = (0..dim * dim).map(|k| format!("x{k},")).collect();
        out.push_str("label\n");
        for s in &self.samples {
            for &v in s.adjacency.entries() {
                out.push_str(if v == 0 { "0," } else { "1," });
            }
            out.push_str(&format!("{}\n", s.label.index()));
        }
        out
    }
}

/// Downsamples the majority class to the minority count and shuffles.
pub fn balance(ds: &Dataset, rng_seed: u64) -> Result<Dataset> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, s) in ds.samples.iter().enumerate() {
        by_class[s.label.index()].push(i);
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::Balance(format!(
            "class counts {:?}; both classes must be nonempty",
            ds.class_counts()
        )));
    }
    let keep = by_class[0].len().min(by_class[1].len());
    let mut rng = rng_from_seed(rng_seed);
    let mut chosen = Vec::with_capacity(2 * keep);
    for class in &mut by_class {
        class.shuffle(&mut rng);
        chosen.extend_from_slice(&class[..keep]);
    }
    chosen.shuffle(&mut rng);
    Ok(ds.with_samples(chosen.into_iter().map(|i| ds.samples[i].clone()).collect()))
}

/// Appends `copies` relabeled variants of every sample. Only nodes `2..n` of
/// the base block are permuted, so labels and hitting times carry over.
pub fn augment_by_shuffle(ds: &Dataset, copies: usize, rng_seed: u64) -> Result<Dataset> {
    let mut samples = ds.samples.clone();
    for (i, s) in ds.samples.iter().enumerate() {
        for c in 0..copies {
            let mut rng = rng_from_seed(derive_seed(rng_seed, (i * copies + c) as u64));
            let tail = random_tail_permutation(s.meta.n, &mut rng);
            let perm: Vec<usize> = (0..s.adjacency.dim())
                .map(|k| if k < s.meta.n { tail[k] } else { k })
                .collect();
            let mut copy = s.clone();
            copy.adjacency = s.adjacency.permute(&perm)?;
            samples.push(copy);
        }
    }
    Ok(ds.with_samples(samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneMode {
    /// Remove near-ties: `|diff| <= threshold`.
    DropMinor,
    /// Remove clear-cut cases: `|diff| >= threshold`, including infinite.
    DropMajor,
}

impl PruneMode {
    /// Whether a sample survives pruning at `threshold_steps`.
    pub fn keeps(self, s: &LabeledSample, threshold_steps: u64) -> bool {
        match (self, s.step_diff().magnitude()) {
            (PruneMode::DropMinor, Some(d)) => d > threshold_steps,
            (PruneMode::DropMinor, None) => true,
            (PruneMode::DropMajor, Some(d)) => d < threshold_steps,
            (PruneMode::DropMajor, None) => false,
        }
    }
}

pub fn prune_by_diff(ds: &Dataset, mode: PruneMode, threshold_steps: u64) -> Dataset {
    ds.with_samples(
        ds.samples
            .iter()
            .filter(|s| mode.keeps(s, threshold_steps))
            .cloned()
            .collect(),
    )
}

/// Stratified random split. All samples sharing a `graph_id` (augmented
/// copies) land on the same side.
pub fn split(ds: &Dataset, train_frac: f64, rng_seed: u64) -> Result<Dataset> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Split(format!("train fraction {train_frac} outside (0, 1)")));
    }
    let mut rng = rng_from_seed(rng_seed);
    let mut train_groups: HashSet<(usize, u64)> = HashSet::new();
    for class in 0..2 {
        let mut groups = Vec::new();
        let mut seen = HashSet::new();
        let mut count = 0;
        for s in ds.samples.iter().filter(|s| s.label.index() == class) {
            count += 1;
            if seen.insert(s.meta.graph_id) {
                groups.push(s.meta.graph_id);
            }
        }
        if count < 2 || groups.len() < 2 {
            return Err(Error::Split(format!(
                "class {class} has {count} samples in {} groups; need at least 2",
                groups.len()
            )));
        }
        groups.shuffle(&mut rng);
        let n_train = ((train_frac * groups.len() as f64).round() as usize).clamp(1, groups.len() - 1);
        train_groups.extend(groups[..n_train].iter().map(|&g| (class, g)));
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..ds.len())
        .partition(|&i| train_groups.contains(&(ds.samples[i].label.index(), ds.samples[i].meta.graph_id)));
    let mut out = ds.clone();
    out.header.split = Some(Split { train, test });
    Ok(out)
}

/// Histogram of step differences with one overflow bin for infinite ones.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u64,
    /// Bin index (`diff.div_euclid(width)`) to count.
    pub bins: BTreeMap<i64, usize>,
    pub infinite: usize,
}

impl Histogram {
    pub fn is_empty(&self) -> bool {
        self.bins.is_empty() && self.infinite == 0
    }

    pub fn total(&self) -> usize {
        self.bins.values().sum::<usize>() + self.infinite
    }

    /// `bin_start,bin_end,count` rows; bins are half-open `[start, end)`.
    pub fn to_csv(&self) -> String {
        let w = self.bin_width as i64;
        let mut out = String::from("bin_start,bin_end,count\n");
        for (&b, &c) in &self.bins {
            out.push_str(&format!("{},{},{c}\n", b * w, (b + 1) * w));
        }
        if self.infinite > 0 {
            out.push_str(&format!("inf,inf,{}\n", self.infinite));
        }
        out
    }
}

pub fn diff_histogram(ds: &Dataset, bin_width: u64) -> Result<Histogram> {
    if bin_width == 0 {
        return Err(Error::InvalidArgument("bin width must be at least 1".into()));
    }
    let mut h = Histogram {
        bin_width,
        ..Histogram::default()
    };
    for s in &ds.samples {
        match s.step_diff() {
            StepDiff::Finite(d) => *h.bins.entry(d.div_euclid(bin_width as i64)).or_default() += 1,
            StepDiff::Infinite { .. } => h.infinite += 1,
        }
    }
    Ok(h)
}

/// Number of samples per source graph, useful for sanity checks on splits.
pub fn group_sizes(ds: &Dataset) -> HashMap<u64, usize> {
    let mut m = HashMap::new();
    for s in &ds.samples {
        *m.entry(s.meta.graph_id).or_default() += 1;
    }
    m
}
