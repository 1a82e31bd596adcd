//! Line, cycle and sparse random graphs with the initial/target labeling
//! convention used throughout the crate: node 0 is where the walker starts and
//! node 1 is the target.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Upper bound on rejection-sampling redraws for a single random graph.
pub const MAX_REDRAWS: usize = 1_000_000;

/// Edge probability of the sparse random family.
pub const DEFAULT_EDGE_PROBABILITY: f64 = 0.05;

pub const INITIAL: usize = 0;
pub const TARGET: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Line,
    Cycle,
    Random,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Line => "line",
            Family::Cycle => "cycle",
            Family::Random => "random",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(Family::Line),
            "cycle" => Ok(Family::Cycle),
            "random" => Ok(Family::Random),
            other => Err(Error::Parse(format!("unknown graph family `{other}`"))),
        }
    }
}

/// An undirected, unweighted base graph on nodes `0..n`.
///
/// Edges are stored as ordered pairs `(i, j)` with `i < j`. Construction
/// rejects self-loops, out-of-range endpoints and isolated nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    family: Family,
}

impl Graph {
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        family: Family,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize {
                what: "graph node count",
                got: n,
                min: 2,
            });
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {a}-{b} out of range for {n} nodes"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let g = Graph {
            n,
            edges: set,
            family,
        };
        if let Some(v) = g.degrees().iter().position(|&d| d == 0) {
            return Err(Error::InvalidGraph(format!("node {v} is isolated")));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn initial(&self) -> usize {
        INITIAL
    }

    pub fn target(&self) -> usize {
        TARGET
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn connected(&self, from: usize, to: usize) -> bool {
        reachable(self.n, &self.edges, from, to)
    }

    pub fn adjacency(&self) -> AdjacencyMatrix {
        let mut m = AdjacencyMatrix::zeros(self.n);
        for &(a, b) in &self.edges {
            m.set(a, b, 1);
            m.set(b, a, 1);
        }
        m
    }

    /// Applies `perm` (old index -> new index) to every node.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        check_permutation(perm, self.n)?;
        Graph::new(
            self.n,
            self.edges.iter().map(|&(a, b)| (perm[a], perm[b])),
            self.family,
        )
    }

    /// Recovers a graph from the top-left `n x n` block of `adj`.
    pub fn from_adjacency(adj: &AdjacencyMatrix, n: usize, family: Family) -> Result<Graph> {
        if n > adj.dim() {
            return Err(Error::InvalidSize {
                what: "adjacency dimension",
                got: adj.dim(),
                min: n,
            });
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if adj.get(i, j) != 0 {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(n, edges, family)
    }
}

fn reachable(n: usize, edges: &BTreeSet<(usize, usize)>, from: usize, to: usize) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        if v == to {
            return true;
        }
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    false
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
    }
    Ok(())
}

/// Text record: `family n initial target i-j i-j ...`.
impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.family, self.n, INITIAL, TARGET)?;
        for &(a, b) in &self.edges {
            write!(f, " {a}-{b}")?;
        }
        Ok(())
    }
}

impl FromStr for Graph {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace();
        let mut next = |what: &str| {
            parts
                .next()
                .ok_or_else(|| Error::Parse(format!("graph record missing {what}")))
        };
        let family: Family = next("family")?.parse()?;
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad integer `{s}`: {e}")))
        };
        let n = parse_usize(next("n")?)?;
        let initial = parse_usize(next("initial")?)?;
        let target = parse_usize(next("target")?)?;
        if initial != INITIAL || target != TARGET {
            return Err(Error::Parse(format!(
                "initial/target must be {INITIAL}/{TARGET}, got {initial}/{target}"
            )));
        }
        let edges = parts
            .map(|tok| {
                let (a, b) = tok
                    .split_once('-')
                    .ok_or_else(|| Error::Parse(format!("bad edge token `{tok}`")))?;
                Ok((parse_usize(a)?, parse_usize(b)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Graph::new(n, edges, family)
    }
}

/// JSON form of a graph with its dense adjacency matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub family: Family,
    pub n: usize,
    pub initial: usize,
    pub target: usize,
    pub adjacency: AdjacencyMatrix,
}

impl From<&Graph> for GraphJson {
    fn from(g: &Graph) -> Self {
        GraphJson {
            family: g.family,
            n: g.n,
            initial: INITIAL,
            target: TARGET,
            adjacency: g.adjacency(),
        }
    }
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;

    fn try_from(j: GraphJson) -> Result<Graph> {
        if j.initial != INITIAL || j.target != TARGET {
            return Err(Error::Parse("initial/target must be 0/1".into()));
        }
        Graph::from_adjacency(&j.adjacency, j.n, j.family)
    }
}

/// Dense square 0/1 matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdjacencyMatrix {
    dim: usize,
    entries: Vec<u8>,
}

impl AdjacencyMatrix {
    pub fn zeros(dim: usize) -> Self {
        AdjacencyMatrix {
            dim,
            entries: vec![0; dim * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let dim = rows.len();
        let mut m = AdjacencyMatrix::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: vec![dim, dim],
                    got: vec![dim, row.len()],
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(Error::Parse(format!("adjacency entry {v} is not 0/1")));
                }
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.entries.chunks(self.dim).map(<[u8]>::to_vec).collect()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.entries
            .chunks(self.dim)
            .map(|r| r.iter().map(|&v| v as usize).sum())
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn transpose(&self) -> Self {
        let mut t = AdjacencyMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Flattened entries as `f64`, the classifier input layout.
    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&v| v as f64).collect()
    }

    /// Applies `perm` (old index -> new index) to rows and columns.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.dim)?;
        let mut out = AdjacencyMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(perm[i], perm[j], self.get(i, j));
            }
        }
        Ok(out)
    }
}

impl Serialize for AdjacencyMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for AdjacencyMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<u8>>::deserialize(d)?;
        AdjacencyMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Embeds `a` in the top-left block of a `big_n x big_n` zero matrix. The
/// extra rows and columns are unconnected nodes.
pub fn pad_adjacency(a: &AdjacencyMatrix, big_n: usize) -> Result<AdjacencyMatrix> {
    if big_n < a.dim {
        return Err(Error::InvalidSize {
            what: "padded dimension",
            got: big_n,
            min: a.dim,
        });
    }
    let mut out = AdjacencyMatrix::zeros(big_n);
    for i in 0..a.dim {
        for j in 0..a.dim {
            out.set(i, j, a.get(i, j));
        }
    }
    Ok(out)
}

/// Maps path/cycle positions to node labels: `initial_pos` becomes 0,
/// `target_pos` becomes 1 and the remaining positions get 2.. in order.
fn position_labels(n: usize, initial_pos: usize, target_pos: usize) -> Vec<usize> {
    let mut label = vec![0; n];
    let mut next = 2;
    for (pos, slot) in label.iter_mut().enumerate() {
        *slot = if pos == initial_pos {
            INITIAL
        } else if pos == target_pos {
            TARGET
        } else {
            next += 1;
            next - 1
        };
    }
    label
}

fn enumerate_placements(n: usize, family: Family) -> Result<Vec<Graph>> {
    if n < 3 {
        return Err(Error::InvalidSize {
            what: "graph node count",
            got: n,
            min: 3,
        });
    }
    let mut positional: Vec<(usize, usize)> = (0..n - 1).map(|k| (k, k + 1)).collect();
    if family == Family::Cycle {
        positional.push((n - 1, 0));
    }
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            let label = position_labels(n, a, b);
            out.push(Graph::new(
                n,
                positional.iter().map(|&(p, q)| (label[p], label[q])),
                family,
            )?);
        }
    }
    Ok(out)
}

/// All `n(n-1)/2` placements of initial and target on a path of `n` nodes.
pub fn enumerate_line_graphs(n: usize) -> Result<Vec<Graph>> {
    enumerate_placements(n, Family::Line)
}

/// All `n(n-1)/2` placements of initial and target on a cycle of `n` nodes.
/// Rotations are kept as distinct placements.
pub fn enumerate_cycle_graphs(n: usize) -> Result<Vec<Graph>> {
    enumerate_placements(n, Family::Cycle)
}

/// Draws one candidate edge set with independent edge probability `p`,
/// skipping geometrically over absent pairs.
fn draw_edges<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    let total = n * (n - 1) / 2;
    let log_q = (1.0 - p).ln();
    let mut idx: usize = 0;
    loop {
        let r: f64 = rng.gen();
        let skip = ((1.0 - r).ln() / log_q).floor();
        if !skip.is_finite() || skip >= (total - idx) as f64 {
            break;
        }
        idx += skip as usize;
        if idx >= total {
            break;
        }
        edges.insert(pair_from_index(n, idx));
        idx += 1;
    }
    edges
}

/// Inverse of the row-major enumeration of pairs `(i, j)`, `i < j`.
fn pair_from_index(n: usize, mut idx: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if idx < row {
            return (i, i + 1 + idx);
        }
        idx -= row;
        i += 1;
    }
}

/// Erdős–Rényi-style random graph, redrawn until no node is isolated and the
/// target is reachable from the initial node.
pub fn random_graph(n: usize, p_edge: f64, rng_seed: u64) -> Result<Graph> {
    let mut rng = rng_from_seed(rng_seed);
    random_graph_with(n, p_edge, &mut rng)
}

pub fn random_graph_with<R: Rng + ?Sized>(n: usize, p_edge: f64, rng: &mut R) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidSize {
            what: "graph node count",
            got: n,
            min: 3,
        });
    }
    if !(p_edge > 0.0 && p_edge < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "edge probability must lie in (0, 1), got {p_edge}"
        )));
    }
    let mut degree = vec![0usize; n];
    for _ in 0..MAX_REDRAWS {
        let edges = draw_edges(n, p_edge, rng);
        degree.iter_mut().for_each(|d| *d = 0);
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        if degree.contains(&0) || !reachable(n, &edges, INITIAL, TARGET) {
            continue;
        }
        return Graph::new(n, edges, Family::Random);
    }
    Err(Error::Generation(format!(
        "no valid {n}-node graph with p = {p_edge} after {MAX_REDRAWS} redraws"
    )))
}

/// Random permutation fixing nodes 0 and 1 (old index -> new index).
pub fn random_tail_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut tail: Vec<usize> = (2..n).collect();
    tail.shuffle(rng);
    [INITIAL, TARGET].into_iter().chain(tail).collect()
}

/// Relabels nodes `2..n` at random, keeping initial and target fixed.
pub fn shuffle_labels(g: &Graph, rng_seed: u64) -> Graph {
    let mut rng = rng_from_seed(rng_seed);
    let perm = random_tail_permutation(g.n, &mut rng);
    g.relabel(&perm).expect("tail permutation is valid")
}
