//! Simulation and classification of quantum speedup for walks on graphs.
//!
//! The crate labels graphs by whether a continuous-time quantum walk (CTQW)
//! reaches a target node faster than a classical continuous-time random walk
//! (CTRW), and trains small neural networks to predict that label from the
//! adjacency matrix alone.
//!
//! * [`graphs`]: line, cycle and sparse random graph construction.
//! * [`walksim`]: classical master equation, Lindblad sink dynamics, hitting
//!   times and dark-state detection bounds.
//! * [`dataset`]: labeling, balancing, pruning, augmentation and splits.
//! * [`neuralnet`]: FC, CNN and CQCNN classifiers trained from scratch.
//! * [`analysis`]: PCA of flattened adjacency matrices.
//! * [`pipeline`]: glue used by the CLI and the acceptance suite.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod graphs;
pub mod neuralnet;
pub mod pipeline;
pub mod rng;
pub mod walksim;

pub use error::{Error, Result};
pub use graphs::{AdjacencyMatrix, Family, Graph};
pub use walksim::{HitSteps, WalkResult, WalkerKind};
pub use dataset::{ClassPair, Dataset, LabeledSample, WalkerSpec};
pub use neuralnet::{Arch, EvalReport, NetworkModel, TrainConfig};
