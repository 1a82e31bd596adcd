use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Cache, Conv2d, Dense, Layer, Param, Probe};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::graphs::{INITIAL, TARGET};
use crate::rng::rng_from_seed;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const HIDDEN_WIDTH: usize = 10;
pub const KERNEL: usize = 3;
pub const CNN_DROPOUT: f64 = 0.2;
pub const CQCNN_PROBES: usize = 6;
pub const CQCNN_COMPRESSED: usize = 5;
pub const INIT_SCHEME: &str = "he_uniform hidden, lecun_uniform output, zero bias";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Fc,
    Cnn,
    Cqcnn,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::Fc, Arch::Cnn, Arch::Cqcnn];

    /// Smallest input size the architecture accepts.
    pub fn min_input(self) -> usize {
        match self {
            Arch::Fc => 3,
            // Four valid 3x3 convolutions need at least one output pixel.
            Arch::Cnn => 4 * (KERNEL - 1) + 1,
            Arch::Cqcnn => 2 * (KERNEL - 1) + 1,
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Fc => "fc",
            Arch::Cnn => "cnn",
            Arch::Cqcnn => "cqcnn",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fc" => Ok(Arch::Fc),
            "cnn" => Ok(Arch::Cnn),
            "cqcnn" => Ok(Arch::Cqcnn),
            _ => Err(Error::Parse(format!("unknown architecture `{s}`"))),
        }
    }
}

/// A classifier over `input_dim x input_dim` adjacency matrices with two
/// output classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub arch: Arch,
    pub input_dim: usize,
    pub layers: Vec<Layer>,
    pub init_seed: u64,
}

/// Activations and caches of one training-mode forward pass.
pub(crate) struct Trace {
    pub acts: Vec<Tensor>,
    pub caches: Vec<Cache>,
}

struct Init<R> {
    rng: R,
}

impl<R: Rng> Init<R> {
    fn uniform(&mut self, len: usize, limit: f64) -> Vec<f64> {
        (0..len).map(|_| self.rng.gen_range(-limit..limit)).collect()
    }

    fn dense(&mut self, inputs: usize, outputs: usize, relu: bool) -> Layer {
        let gain = if relu { 6.0 } else { 3.0 };
        Layer::Dense(Dense {
            inputs,
            outputs,
            weight: Param::learnable(self.uniform(inputs * outputs, (gain / inputs as f64).sqrt())),
            bias: Param::learnable(vec![0.0; outputs]),
        })
    }

    fn conv(&mut self, in_channels: usize, out_channels: usize, kernel: usize) -> Layer {
        let fan_in = in_channels * kernel * kernel;
        Layer::Conv2d(Conv2d {
            in_channels,
            out_channels,
            kernel,
            weight: Param::learnable(self.uniform(out_channels * fan_in, (6.0 / fan_in as f64).sqrt())),
            bias: Param::learnable(vec![0.0; out_channels]),
        })
    }
}

/// The six fixed CQCNN filters: initial-node row and column, target-node row
/// and column, node degree and global edge density. Every channel also
/// passes the adjacency matrix through unchanged.
fn probe_bank(n: usize) -> Probe {
    let mut row = vec![0.0; CQCNN_PROBES * n];
    let mut col = vec![0.0; CQCNN_PROBES * n];
    row[INITIAL] = 1.0;
    col[n + INITIAL] = 1.0;
    row[2 * n + TARGET] = 1.0;
    col[3 * n + TARGET] = 1.0;
    for k in 0..n {
        row[4 * n + k] = 1.0;
        col[4 * n + k] = 1.0;
    }
    let mut beta = vec![0.0; CQCNN_PROBES];
    beta[5] = n as f64;
    Probe {
        size: n,
        alpha: Param::frozen(vec![1.0; CQCNN_PROBES]),
        row: Param::frozen(row),
        col: Param::frozen(col),
        beta: Param::frozen(beta),
    }
}

/// Builds an untrained model. Hidden layers use ReLU; the two outputs are
/// logits turned into probabilities by [`NetworkModel::forward`].
pub fn build_model(arch: Arch, n: usize, rng_seed: u64) -> Result<NetworkModel> {
    if n < arch.min_input() {
        return Err(Error::InvalidSize {
            what: "network input size",
            got: n,
            min: arch.min_input(),
        });
    }
    let mut init = Init {
        rng: rng_from_seed(rng_seed),
    };
    let w = HIDDEN_WIDTH;
    let mut layers = Vec::new();
    match arch {
        Arch::Fc => {
            layers.push(Layer::Flatten);
            let mut inputs = n * n;
            for _ in 0..3 {
                layers.push(init.dense(inputs, w, true));
                layers.push(Layer::Relu);
                inputs = w;
            }
            layers.push(init.dense(w, 2, false));
        }
        Arch::Cnn => {
            let mut channels = 1;
            for out in [n, w, w, w] {
                layers.push(init.conv(channels, out, KERNEL));
                layers.push(Layer::Relu);
                channels = out;
            }
            layers.push(Layer::Dropout { rate: CNN_DROPOUT });
            layers.push(Layer::Flatten);
            let side = n - 4 * (KERNEL - 1);
            let mut inputs = w * side * side;
            for _ in 0..3 {
                layers.push(init.dense(inputs, w, true));
                layers.push(Layer::Relu);
                inputs = w;
            }
            layers.push(init.dense(w, 2, false));
        }
        Arch::Cqcnn => {
            layers.push(Layer::Probe(probe_bank(n)));
            layers.push(Layer::TriangularMask);
            layers.push(init.conv(CQCNN_PROBES, w, KERNEL));
            layers.push(Layer::Relu);
            layers.push(init.conv(w, w, KERNEL));
            layers.push(Layer::Relu);
            layers.push(init.conv(w, CQCNN_COMPRESSED, 1));
            layers.push(Layer::Relu);
            layers.push(Layer::Flatten);
            let side = n - 2 * (KERNEL - 1);
            layers.push(init.dense(CQCNN_COMPRESSED * side * side, w, true));
            layers.push(Layer::Relu);
            layers.push(init.dense(w, 2, false));
        }
    }
    Ok(NetworkModel {
        arch,
        input_dim: n,
        layers,
        init_seed: rng_seed,
    })
}

/// Row-wise softmax of `[batch, classes]` logits.
pub fn softmax(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    let c = logits.shape()[1];
    for row in out.data_mut().chunks_mut(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy of logits against integer labels, and its gradient
/// with respect to the logits.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> (f64, Tensor) {
    let probs = softmax(logits);
    let c = logits.shape()[1];
    let b = labels.len() as f64;
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        let row = &logits.data()[i * c..(i + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        grad.data_mut()[i * c + y] -= 1.0;
    }
    for g in grad.data_mut() {
        *g /= b;
    }
    (loss / b, grad)
}

impl NetworkModel {
    /// Number of parameters, optionally counting only learnable ones.
    pub fn param_count(&self, trainable_only: bool) -> usize {
        self.params()
            .iter()
            .filter(|p| p.trainable || !trainable_only)
            .map(|p| p.value.len())
            .sum()
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Zero-filled gradient buffers matching [`NetworkModel::params`].
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params().iter().map(|p| vec![0.0; p.value.len()]).collect()
    }

    fn check_input(&self, batch: &Tensor) -> Result<Tensor> {
        let n = self.input_dim;
        match batch.shape() {
            [b, h, w] if *h == n && *w == n => batch.clone().reshape(vec![*b, 1, n, n]),
            [b, 1, h, w] if *h == n && *w == n => Ok(batch.clone().reshape(vec![*b, 1, n, n])?),
            other => Err(Error::ShapeMismatch {
                expected: vec![0, n, n],
                got: other.to_vec(),
            }),
        }
    }

    /// Logits for a `[batch, n, n]` input. Dropout is active only when an
    /// rng is supplied.
    pub fn logits<R: Rng + ?Sized>(&self, batch: &Tensor, mut rng: Option<&mut R>) -> Result<Tensor> {
        let mut x = self.check_input(batch)?;
        for layer in &self.layers {
            x = layer.forward(&x, rng.as_deref_mut(), false)?.0;
        }
        Ok(x)
    }

    /// Class probabilities (rows sum to one).
    pub fn forward<R: Rng + ?Sized>(&self, batch: &Tensor, rng: Option<&mut R>) -> Result<Tensor> {
        Ok(softmax(&self.logits(batch, rng)?))
    }

    /// Inference-mode class probabilities.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        self.forward::<rand_chacha::ChaCha8Rng>(batch, None)
    }

    pub(crate) fn forward_trace<R: Rng + ?Sized>(
        &self,
        batch: &Tensor,
        mut rng: Option<&mut R>,
    ) -> Result<Trace> {
        let mut acts = vec![self.check_input(batch)?];
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, cache) = layer.forward(acts.last().unwrap(), rng.as_deref_mut(), true)?;
            acts.push(y);
            caches.push(cache);
        }
        Ok(Trace { acts, caches })
    }

    /// Accumulates parameter gradients of the loss whose logit gradient is
    /// `dlogits` into `grads`.
    pub(crate) fn backward(&self, trace: &Trace, dlogits: Tensor, grads: &mut [Vec<f64>]) {
        let mut offsets = Vec::with_capacity(self.layers.len() + 1);
        offsets.push(0);
        for layer in &self.layers {
            offsets.push(offsets.last().unwrap() + layer.params().len());
        }
        let mut dy = dlogits;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let g = &mut grads[offsets[i]..offsets[i + 1]];
            match layer.backward(&trace.acts[i], &trace.caches[i], &dy, g, i > 0) {
                Some(dx) => dy = dx,
                None => break,
            }
        }
    }

    /// Mean loss and parameter gradients on one batch with dropout disabled.
    pub fn loss_and_grads(&self, batch: &Tensor, labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
        let trace = self.forward_trace::<rand_chacha::ChaCha8Rng>(batch, None)?;
        let (loss, dlogits) = cross_entropy(trace.acts.last().unwrap(), labels);
        let mut grads = self.zero_grads();
        self.backward(&trace, dlogits, &mut grads);
        Ok((loss, grads))
    }

    /// Copy of this model with every parameter set to zero.
    pub fn zeroed(&self) -> Self {
        let mut m = self.clone();
        for p in m.params_mut() {
            p.value.fill(0.0);
        }
        m
    }

    /// One-line-per-layer description with output shapes.
    pub fn describe(&self) -> String {
        let mut shape = vec![1, 1, self.input_dim, self.input_dim];
        let mut out = format!("{} on {}x{} input\n", self.arch, self.input_dim, self.input_dim);
        for layer in &self.layers {
            shape = layer.output_shape(&shape).expect("layers chain");
            let count: usize = layer.params().iter().map(|p| p.value.len()).sum();
            out.push_str(&format!("  {:<16} {:?} params={count}\n", layer.name(), &shape[1..]));
        }
        out
    }
}

/// JSON checkpoint: the model plus free-form training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub init: String,
    pub model: NetworkModel,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    pub fn new(model: NetworkModel, metadata: serde_json::Value) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            init: INIT_SCHEME.to_string(),
            model,
            metadata,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let ck: Checkpoint = serde_json::from_reader(file)?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint version {}",
                ck.format_version
            )));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(b: usize, n: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..b * n * n).map(|_| f64::from(rng.gen_bool(0.3) as u8)).collect();
        Tensor::new(vec![b, n, n], data).unwrap()
    }

    #[test]
    fn fc_parameter_count() {
        let m = build_model(Arch::Fc, 6, 0).unwrap();
        assert_eq!(m.param_count(true), 612);
    }

    #[test]
    fn cnn_spatial_sizes() {
        let m = build_model(Arch::Cnn, 12, 0).unwrap();
        let mut shape = vec![1, 1, 12, 12];
        let mut sides = Vec::new();
        for l in &m.layers {
            shape = l.output_shape(&shape).unwrap();
            if matches!(l, Layer::Conv2d(_)) {
                sides.push(shape[2]);
            }
        }
        assert_eq!(sides, vec![10, 8, 6, 4]);
        let channels: Vec<usize> = m
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv2d(c) => Some(c.out_channels),
                _ => None,
            })
            .collect();
        assert_eq!(channels, vec![12, 10, 10, 10]);
    }

    #[test]
    fn size_limits() {
        assert!(build_model(Arch::Fc, 2, 0).is_err());
        assert!(build_model(Arch::Cnn, 8, 0).is_err());
        assert!(build_model(Arch::Cnn, 9, 0).is_ok());
        assert!(build_model(Arch::Cqcnn, 4, 0).is_err());
        assert!(build_model(Arch::Cqcnn, 5, 0).is_ok());
    }

    #[test]
    fn same_seed_same_weights() {
        for arch in Arch::ALL {
            assert_eq!(build_model(arch, 10, 3).unwrap(), build_model(arch, 10, 3).unwrap());
            assert_ne!(build_model(arch, 10, 3).unwrap(), build_model(arch, 10, 4).unwrap());
        }
    }

    #[test]
    fn probe_parameters_are_frozen() {
        let m = build_model(Arch::Cqcnn, 6, 0).unwrap();
        let frozen = m.param_count(false) - m.param_count(true);
        assert_eq!(frozen, 6 + 36 + 36 + 6);
        let batch = random_batch(3, 6, 1);
        let (_, grads) = m.loss_and_grads(&batch, &[0, 1, 1]).unwrap();
        for (p, g) in m.params().iter().zip(&grads) {
            if !p.trainable {
                assert!(g.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        for arch in Arch::ALL {
            let m = build_model(arch, 10, 0).unwrap().zeroed();
            let p = m.predict(&random_batch(4, 10, 2)).unwrap();
            assert!(p.data().iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn uniform_prediction_loss_is_ln2() {
        let logits = Tensor::zeros(vec![5, 2]);
        let (loss, _) = cross_entropy(&logits, &[0, 1, 1, 0, 1]);
        assert!((loss - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_stable() {
        let logits = Tensor::new(vec![2, 2], vec![1000.0, -1000.0, 3.0, 3.0]).unwrap();
        let p = softmax(&logits);
        assert_eq!(p.data(), &[1.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let m = build_model(Arch::Fc, 6, 0).unwrap();
        assert!(matches!(m.predict(&random_batch(2, 7, 0)), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = std::env::temp_dir().join(format!("qwalk-ck-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        let ck = Checkpoint::new(build_model(Arch::Cqcnn, 7, 9).unwrap(), serde_json::json!({"epochs": 3}));
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
