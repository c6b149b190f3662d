//! Neural normalized cut, `no_std` core.
//!
//! Spectral clustering without an eigendecomposition at inference time: a
//! small MLP with a softmax head maps each point to a soft cluster
//! membership, and is trained on mini-batches against a relaxed normalized
//! cut (or ratio cut) objective built from a per-batch heat-kernel graph.
//!
//! The crate only needs `alloc`. File formats, checkpoints and the
//! command-line tool live in the companion `neuncut` crate.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | heat-kernel affinity, kNN sparsification, Laplacians |
//! | [`data`] | [`DataMatrix`], synthetic generators, mini-batch sampling |
//! | [`model`] | MLP membership network with exact reverse-mode gradients |
//! | [`loss`] | volume estimation and the relaxed Ncut / Rcut losses |
//! | [`optim`] | Adam with decoupled weight decay, cosine annealing |
//! | [`trainer`] | the EM-style training loop and inference |
//! | [`baseline`] | dense eigensolver, k-means, classical Ncut clustering |
//! | [`metrics`] | ACC (optimal assignment), NMI, ARI |
//! | [`gamma_search`] | label-free selection of the penalty weight |

#![no_std]

extern crate alloc;

pub mod baseline;
pub mod data;
mod error;
pub mod gamma_search;
pub mod graph;
pub mod loss;
mod matrix;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod trainer;

pub use data::DataMatrix;
pub use error::{Divergence, Error, Result};
pub use graph::AffinityGraph;
pub use matrix::Matrix;
pub use model::MlpModel;
pub use trainer::{infer, train, train_best_of, Objective, TrainConfig, TrainLog};
