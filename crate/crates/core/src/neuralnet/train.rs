use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{argmax_rows, evaluate, EvalReport};
use super::model::{build_model, cross_entropy, Arch, NetworkModel};
use super::Examples;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            _ => Err(Error::Parse(format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 10,
            epochs: 50,
            optimizer: Optimizer::Sgd,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument("batch size and epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch training statistics. Training figures are running averages
/// over the epoch's mini-batches with dropout active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NetworkModel,
    pub curves: Vec<EpochRecord>,
}

struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    fn new(cfg: &TrainConfig, model: &NetworkModel) -> Self {
        let zeros = model.zero_grads();
        OptimizerState {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn apply(&mut self, model: &mut NetworkModel, grads: &[Vec<f64>]) {
        self.step += 1;
        let (c1, c2) = (
            1.0 - ADAM_BETA1.powi(self.step),
            1.0 - ADAM_BETA2.powi(self.step),
        );
        for (k, p) in model.params_mut().into_iter().enumerate() {
            if !p.trainable {
                continue;
            }
            match self.kind {
                Optimizer::Sgd => {
                    for (w, g) in p.value.iter_mut().zip(&grads[k]) {
                        *w -= self.lr * g;
                    }
                }
                Optimizer::Adam => {
                    let lr = self.lr * c2.sqrt() / c1;
                    for (((w, g), m), v) in p
                        .value
                        .iter_mut()
                        .zip(&grads[k])
                        .zip(self.m[k].iter_mut())
                        .zip(self.v[k].iter_mut())
                    {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                        *w -= lr * *m / (v.sqrt() + ADAM_EPSILON);
                    }
                }
            }
        }
    }
}

/// Mini-batch training on cross-entropy. Deterministic for a given model,
/// data and `cfg.rng_seed`. When `test` is given its loss and accuracy are
/// recorded after every epoch.
pub fn train(
    mut model: NetworkModel,
    train_set: &Examples,
    test_set: Option<&Examples>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if train_set.dim != model.input_dim {
        return Err(Error::ShapeMismatch {
            expected: vec![model.input_dim, model.input_dim],
            got: vec![train_set.dim, train_set.dim],
        });
    }
    let mut rng = rng_from_seed(cfg.rng_seed);
    let mut opt = OptimizerState::new(cfg, &model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curves = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0);
        for chunk in order.chunks(cfg.batch_size) {
            let (batch, labels) = train_set.batch(chunk)?;
            let trace = model.forward_trace(&batch, Some(&mut rng))?;
            let logits = trace.acts.last().unwrap();
            let (loss, dlogits) = cross_entropy(logits, &labels);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            loss_sum += loss * chunk.len() as f64;
            correct += argmax_rows(logits)
                .iter()
                .zip(&labels)
                .filter(|(p, l)| p == l)
                .count();
            let mut grads = model.zero_grads();
            model.backward(&trace, dlogits, &mut grads);
            opt.apply(&mut model, &grads);
        }
        let (test_loss, test_accuracy) = match test_set {
            Some(t) => {
                let r = evaluate(&model, t)?;
                if !r.loss.is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                (Some(r.loss), Some(r.accuracy))
            }
            None => (None, None),
        };
        curves.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            test_loss,
            test_accuracy,
        });
    }
    Ok(TrainOutcome { model, curves })
}

/// One of several independently seeded runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub report: EvalReport,
    #[serde(skip)]
    pub model: Option<NetworkModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEpoch {
    pub epoch: usize,
    pub train_loss_mean: f64,
    pub test_acc_mean: f64,
    pub test_acc_std: f64,
    pub test_loss_mean: f64,
    pub test_loss_std: f64,
}

/// Mean and sample standard deviation over repeated runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub arch: Arch,
    pub input_dim: usize,
    pub config: TrainConfig,
    pub runs: Vec<RunResult>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub loss_mean: f64,
    pub precision_mean: [f64; 2],
    pub recall_mean: [f64; 2],
    pub f1_mean: [f64; 2],
    pub curves: Vec<MeanEpoch>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RepeatSummary {
    fn from_runs(arch: Arch, input_dim: usize, config: TrainConfig, runs: Vec<RunResult>) -> Self {
        let col = |f: &dyn Fn(&EvalReport) -> f64| -> f64 {
            mean_std(&runs.iter().map(|r| f(&r.report)).collect::<Vec<_>>()).0
        };
        let (accuracy_mean, accuracy_std) =
            mean_std(&runs.iter().map(|r| r.report.accuracy).collect::<Vec<_>>());
        let epochs = runs.iter().map(|r| r.report.curves.len()).min().unwrap_or(0);
        let curves = (0..epochs)
            .map(|e| {
                let at = |f: &dyn Fn(&EpochRecord) -> f64| {
                    mean_std(&runs.iter().map(|r| f(&r.report.curves[e])).collect::<Vec<_>>())
                };
                let acc = at(&|c| c.test_accuracy.unwrap_or(f64::NAN));
                let loss = at(&|c| c.test_loss.unwrap_or(f64::NAN));
                MeanEpoch {
                    epoch: e + 1,
                    train_loss_mean: at(&|c| c.train_loss).0,
                    test_acc_mean: acc.0,
                    test_acc_std: acc.1,
                    test_loss_mean: loss.0,
                    test_loss_std: loss.1,
                }
            })
            .collect();
        RepeatSummary {
            arch,
            input_dim,
            config,
            accuracy_mean,
            accuracy_std,
            loss_mean: col(&|r| r.loss),
            precision_mean: [col(&|r| r.precision[0]), col(&|r| r.precision[1])],
            recall_mean: [col(&|r| r.recall[0]), col(&|r| r.recall[1])],
            f1_mean: [col(&|r| r.f1[0]), col(&|r| r.f1[1])],
            curves,
            runs,
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.report.accuracy).collect()
    }

    /// `epoch,test_acc,test_acc_std,test_loss,test_loss_std` rows.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("epoch,test_acc,test_acc_std,test_loss,test_loss_std\n");
        for c in &self.curves {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.epoch, c.test_acc_mean, c.test_acc_std, c.test_loss_mean, c.test_loss_std
            ));
        }
        out
    }
}

/// Trains `repeats` models with seeds `cfg.rng_seed + r` (used for both the
/// initial weights and the batch order) and evaluates each on `test_set`.
/// Runs execute in parallel on the current rayon pool; each run is serial.
pub fn train_repeats(
    arch: Arch,
    input_dim: usize,
    train_set: &Examples,
    test_set: &Examples,
    cfg: &TrainConfig,
    repeats: usize,
    keep_models: bool,
) -> Result<RepeatSummary> {
    let runs = (0..repeats as u64)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.rng_seed + r;
            let model = build_model(arch, input_dim, derive_seed(seed, 0))?;
            let run_cfg = TrainConfig {
                rng_seed: derive_seed(seed, 1),
                ..*cfg
            };
            let out = train(model, train_set, Some(test_set), &run_cfg)?;
            let mut report = evaluate(&out.model, test_set)?;
            report.curves = out.curves;
            Ok(RunResult {
                seed,
                report,
                model: keep_models.then_some(out.model),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepeatSummary::from_runs(arch, input_dim, *cfg, runs))
}
