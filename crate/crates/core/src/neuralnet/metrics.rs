use serde::{Deserialize, Serialize};

use super::model::{cross_entropy, NetworkModel};
use super::tensor::Tensor;
use super::train::EpochRecord;
use super::Examples;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

const EVAL_CHUNK: usize = 256;

/// Confusion counts with class 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Precision, recall and F1 for one choice of positive class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn from_predictions(predicted: &[usize], actual: &[usize]) -> Self {
        let mut c = Confusion::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// Counts seen from the other class as positive.
    pub fn swapped(&self) -> Confusion {
        Confusion {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }

    /// Metrics for the positive class. Empty denominators give zero.
    pub fn positive_metrics(&self) -> ClassMetrics {
        ClassMetrics {
            precision: ratio(self.tp, self.tp + self.fp),
            recall: ratio(self.tp, self.tp + self.fn_),
            f1: ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_),
        }
    }

    /// Metrics with class `c` as positive.
    pub fn class_metrics(&self, c: usize) -> ClassMetrics {
        if c == 1 {
            self.positive_metrics()
        } else {
            self.swapped().positive_metrics()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub accuracy: f64,
    pub loss: f64,
    /// Indexed by class, each class taken in turn as positive.
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub f1: [f64; 2],
    pub confusion: Confusion,
    #[serde(default)]
    pub curves: Vec<EpochRecord>,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion, loss: f64) -> Self {
        let m = [confusion.class_metrics(0), confusion.class_metrics(1)];
        EvalReport {
            n_samples: confusion.total(),
            accuracy: confusion.accuracy(),
            loss,
            precision: [m[0].precision, m[1].precision],
            recall: [m[0].recall, m[1].recall],
            f1: [m[0].f1, m[1].f1],
            confusion,
            curves: Vec::new(),
        }
    }

    /// `epoch,test_acc,test_loss` rows of the training curves.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("epoch,test_acc,test_loss\n");
        for r in &self.curves {
            if let (Some(a), Some(l)) = (r.test_accuracy, r.test_loss) {
                out.push_str(&format!("{},{a},{l}\n", r.epoch));
            }
        }
        out
    }
}

/// Class predictions and mean loss over a set of examples.
pub(crate) fn predict_all(model: &NetworkModel, ex: &Examples) -> Result<(Vec<usize>, f64)> {
    let mut predicted = Vec::with_capacity(ex.len());
    let mut loss_sum = 0.0;
    let indices: Vec<usize> = (0..ex.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let (batch, labels) = ex.batch(chunk)?;
        let logits = model.logits::<rand_chacha::ChaCha8Rng>(&batch, None)?;
        loss_sum += cross_entropy(&logits, &labels).0 * chunk.len() as f64;
        predicted.extend(argmax_rows(&logits));
    }
    Ok((predicted, loss_sum / ex.len() as f64))
}

pub(crate) fn argmax_rows(t: &Tensor) -> Vec<usize> {
    let c = t.shape()[1];
    t.data()
        .chunks(c)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

/// Accuracy, loss and per-class metrics on `ex`.
pub fn evaluate(model: &NetworkModel, ex: &Examples) -> Result<EvalReport> {
    if ex.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty set".into()));
    }
    let (predicted, loss) = predict_all(model, ex)?;
    Ok(EvalReport::from_confusion(
        Confusion::from_predictions(&predicted, &ex.labels),
        loss,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub size: usize,
    pub report: EvalReport,
}

/// Evaluates a model on test sets of several graph sizes, zero-padding each
/// to the model's input size.
pub fn generalization_sweep(model: &NetworkModel, sets: &[Dataset]) -> Result<Vec<SweepPoint>> {
    sets.iter()
        .map(|ds| {
            let size = ds.header.n;
            if size > model.input_dim {
                return Err(Error::InvalidSize {
                    what: "sweep test size above model input",
                    got: size,
                    min: model.input_dim,
                });
            }
            let ex = Examples::from_dataset(ds, model.input_dim)?;
            Ok(SweepPoint {
                size,
                report: evaluate(model, &ex)?,
            })
        })
        .collect()
}

/// `size,accuracy,loss` rows.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("size,accuracy,loss\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.size, p.report.accuracy, p.report.loss));
    }
    out
}
