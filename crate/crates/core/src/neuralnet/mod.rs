//! FC, CNN and CQCNN classifiers over adjacency matrices, with forward and
//! backward passes written out by hand.

mod layers;
mod metrics;
mod model;
mod tensor;
mod train;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

pub use layers::{Conv2d, Dense, Layer, Param, Probe};
pub use metrics::{
    evaluate, generalization_sweep, sweep_csv, ClassMetrics, Confusion, EvalReport, SweepPoint,
};
pub use model::{
    build_model, cross_entropy, softmax, Arch, Checkpoint, NetworkModel, CHECKPOINT_VERSION,
    CNN_DROPOUT, HIDDEN_WIDTH, INIT_SCHEME, KERNEL,
};
pub use tensor::Tensor;
pub use train::{
    mean_std, train, train_repeats, EpochRecord, MeanEpoch, Optimizer, RepeatSummary, RunResult,
    TrainConfig, TrainOutcome, ADAM_EPSILON,
};

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::graphs::pad_adjacency;
use crate::rng::rng_from_seed;

/// Network inputs: `len` flattened `dim x dim` matrices and their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    pub dim: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn new(dim: usize, inputs: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != dim * dim * labels.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![labels.len(), dim, dim],
                got: vec![inputs.len()],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not 0 or 1")));
        }
        Ok(Examples { dim, inputs, labels })
    }

    /// Adjacency matrices zero-padded to `dim`.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a LabeledSample>, dim: usize) -> Result<Self> {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for s in samples {
            inputs.extend(pad_adjacency(&s.adjacency, dim)?.to_f64());
            labels.push(s.label.index());
        }
        Examples::new(dim, inputs, labels)
    }

    pub fn from_dataset(ds: &Dataset, dim: usize) -> Result<Self> {
        Examples::from_samples(&ds.samples, dim)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[indices.len(), dim, dim]` batch and matching labels.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let sz = self.dim * self.dim;
        let mut data = Vec::with_capacity(indices.len() * sz);
        for &i in indices {
            data.extend_from_slice(&self.inputs[i * sz..(i + 1) * sz]);
        }
        let t = Tensor::new(vec![indices.len(), self.dim, self.dim], data)?;
        Ok((t, indices.iter().map(|&i| self.labels[i]).collect()))
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub checked: usize,
    pub max_relative_deviation: f64,
}

/// Which parameter entries [`gradient_check`] perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradScope {
    AllTrainable,
    BiasesOnly,
}

pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Denominator floor of the relative deviation, so near-zero gradients are
/// compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compares analytic gradients with central finite differences on up to
/// `max_entries` randomly chosen parameter entries. Dropout is disabled.
pub fn gradient_check(
    model: &NetworkModel,
    batch: &Tensor,
    labels: &[usize],
    scope: GradScope,
    max_entries: usize,
    rng_seed: u64,
) -> Result<GradCheck> {
    let (_, grads) = model.loss_and_grads(batch, labels)?;
    let is_bias: Vec<bool> = model
        .layers
        .iter()
        .flat_map(|l| {
            let k = l.params().len();
            let bias = matches!(l, Layer::Dense(_) | Layer::Conv2d(_));
            (0..k).map(move |i| bias && i == 1)
        })
        .collect();
    let candidates: Vec<(usize, usize)> = model
        .params()
        .iter()
        .enumerate()
        .filter(|(k, p)| p.trainable && (scope == GradScope::AllTrainable || is_bias[*k]))
        .flat_map(|(k, p)| (0..p.value.len()).map(move |i| (k, i)))
        .collect();
    let mut rng = rng_from_seed(rng_seed);
    let picks = sample(&mut rng, candidates.len(), max_entries.min(candidates.len()));
    let loss_at = |k: usize, i: usize, delta: f64| -> Result<f64> {
        let mut m = model.clone();
        m.params_mut()[k].value[i] += delta;
        let logits = m.logits::<rand_chacha::ChaCha8Rng>(batch, None)?;
        Ok(cross_entropy(&logits, labels).0)
    };
    let mut worst: f64 = 0.0;
    for idx in picks.iter() {
        let (k, i) = candidates[idx];
        let numeric =
            (loss_at(k, i, GRAD_CHECK_STEP)? - loss_at(k, i, -GRAD_CHECK_STEP)?) / (2.0 * GRAD_CHECK_STEP);
        let analytic = grads[k][i];
        let dev = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max(dev);
    }
    Ok(GradCheck {
        checked: picks.len(),
        max_relative_deviation: worst,
    })
}
