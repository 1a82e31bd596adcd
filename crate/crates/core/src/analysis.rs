//! Principal component analysis of flattened adjacency matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graphs::pad_adjacency;

/// Total variance below this is treated as all-identical samples.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub mean: Vec<f64>,
    /// Unit-length principal directions, strongest first. The sign of each is
    /// chosen so its largest-magnitude coordinate is positive.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
    /// Per-sample coordinates along `components`.
    pub projected: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

/// Explained variances plus the preprocessing applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub k: usize,
    pub samples: usize,
    pub feature_dim: usize,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub total_variance: f64,
    pub centered: bool,
    pub scaled: bool,
}

/// PCA on the flattened adjacency matrices of `ds`, zero-padded to the
/// largest graph in the set.
pub fn pca(ds: &Dataset, k: usize) -> Result<PcaResult> {
    let dim = ds.samples.iter().map(|s| s.adjacency.dim()).max().unwrap_or(0);
    let mut features = Vec::with_capacity(ds.len());
    for s in &ds.samples {
        features.push(pad_adjacency(&s.adjacency, dim)?.to_f64());
    }
    let labels = ds.samples.iter().map(|s| s.label.index()).collect();
    pca_features(&features, labels, k)
}

/// PCA of arbitrary feature rows via the eigendecomposition of the sample
/// covariance (denominator `samples - 1`). Data are centered, not scaled.
pub fn pca_features(features: &[Vec<f64>], labels: Vec<usize>, k: usize) -> Result<PcaResult> {
    let m = features.len();
    let d = features.first().map_or(0, Vec::len);
    if k == 0 || k > d {
        return Err(Error::InvalidSize {
            what: "principal components (must not exceed the feature dimension)",
            got: k,
            min: 1,
        });
    }
    if m < k + 1 {
        return Err(Error::InvalidSize {
            what: "PCA samples",
            got: m,
            min: k + 1,
        });
    }
    if features.iter().any(|f| f.len() != d) || labels.len() != m {
        return Err(Error::ShapeMismatch {
            expected: vec![m, d],
            got: vec![features.len(), labels.len()],
        });
    }
    let mut mean = vec![0.0; d];
    for f in features {
        for (acc, v) in mean.iter_mut().zip(f) {
            *acc += v / m as f64;
        }
    }
    let centered = DMatrix::from_fn(m, d, |i, j| features[i][j] - mean[j]);
    let cov = centered.tr_mul(&centered) / (m as f64 - 1.0);
    let total_variance = cov.trace();
    if total_variance <= RANK_TOLERANCE {
        return Err(Error::Rank("all samples are identical".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &c in &order[..k] {
        let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let lead = v.iter().cloned().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[c].max(0.0));
    }
    let projected = (0..m)
        .map(|i| {
            components
                .iter()
                .map(|c| c.iter().zip(centered.row(i).iter()).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(PcaResult {
        mean,
        components,
        explained_variance,
        total_variance,
        projected,
        labels,
    })
}

impl PcaResult {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn summary(&self) -> PcaSummary {
        PcaSummary {
            k: self.k(),
            samples: self.projected.len(),
            feature_dim: self.mean.len(),
            explained_ratio: self
                .explained_variance
                .iter()
                .map(|v| v / self.total_variance)
                .collect(),
            explained_variance: self.explained_variance.clone(),
            total_variance: self.total_variance,
            centered: true,
            scaled: false,
        }
    }

    /// Mean squared distance between the centered features and their
    /// projection onto the first `k` components.
    pub fn reconstruction_error(&self, features: &[Vec<f64>], k: usize) -> f64 {
        let k = k.min(self.k());
        let mut total = 0.0;
        for f in features {
            let x: Vec<f64> = f.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
            let mut r = x.clone();
            for c in &self.components[..k] {
                let coef: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                for (ri, ci) in r.iter_mut().zip(c) {
                    *ri -= coef * ci;
                }
            }
            total += r.iter().map(|v| v * v).sum::<f64>();
        }
        total / features.len() as f64
    }
}

/// `pc1..pck,label` rows.
pub fn export_projection(r: &PcaResult) -> String {
    let mut out: String = (1..=r.k()).map(|i| format!("pc{i},")).collect();
    out.push_str("label\n");
    for (p, l) in r.projected.iter().zip(&r.labels) {
        for v in p {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{l}\n"));
    }
    out
}

/// Parses [`export_projection`] output back into coordinates and labels.
pub fn parse_projection(csv: &str) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut lines = csv.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty projection file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let k = cols.len().saturating_sub(1);
    let expected: Vec<String> = (1..=k).map(|i| format!("pc{i}")).chain(["label".into()]).collect();
    if cols != expected {
        return Err(Error::Parse(format!("unexpected projection header `{header}`")));
    }
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k + 1 {
            return Err(Error::Parse(format!("row {} has {} fields", i + 2, fields.len())));
        }
        let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("row {}: {e}", i + 2));
        coords.push(
            fields[..k]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| bad(&e)))
                .collect::<Result<Vec<_>>>()?,
        );
        labels.push(fields[k].parse().map_err(|e| bad(&e))?);
    }
    Ok((coords, labels))
}

/// Training accuracy of a logistic-regression separator fitted by full-batch
/// gradient descent on standardized coordinates.
pub fn logistic_separability(points: &[Vec<f64>], labels: &[usize], iterations: usize) -> f64 {
    let m = points.len();
    let d = points.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for p in points {
        for j in 0..d {
            mean[j] += p[j] / m as f64;
        }
    }
    for p in points {
        for j in 0..d {
            sd[j] += (p[j] - mean[j]).powi(2) / m as f64;
        }
    }
    let z: Vec<Vec<f64>> = points
        .iter()
        .map(|p| (0..d).map(|j| (p[j] - mean[j]) / sd[j].sqrt().max(1e-12)).collect())
        .collect();
    let mut w = vec![0.0; d + 1];
    for _ in 0..iterations {
        let mut g = vec![0.0; d + 1];
        for (x, &y) in z.iter().zip(labels) {
            let s = w[d] + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let err = 1.0 / (1.0 + (-s).exp()) - y as f64;
            for j in 0..d {
                g[j] += err * x[j];
            }
            g[d] += err;
        }
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj -= gj / m as f64;
        }
    }
    let correct = z
        .iter()
        .zip(labels)
        .filter(|(x, &y)| {
            let s = w[d] + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            usize::from(s > 0.0) == y
        })
        .count();
    correct as f64 / m as f64
}
