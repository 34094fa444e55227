//! Class-incremental classification against pre-defined evenly-distributed
//! class centroids (PEDCC).
//!
//! Every arriving batch of classes gets its own small dense network whose last
//! linear layer is frozen to a set of unit centroids spread evenly over the
//! feature hypersphere. Networks are trained in isolation with a composite
//! additive-margin softmax plus centroid-regression loss, and a sample is
//! classified by the largest cosine similarity between its latent feature and
//! any centroid of any trained network.
//!
//! Module map:
//!
//! - [`centroids`]: centroid generation (regular simplex, repulsive energy) and
//!   the centroid file format.
//! - [`netcore`]: the dense feature extractor with its frozen head.
//! - [`loss`]: the PEDCC loss and its gradient.
//! - [`trainer`]: SGD with momentum, weight decay and a step schedule.
//! - [`classifier`]: cosine discriminant, subset and ensemble prediction.
//! - [`incremental`]: the ensemble, evaluation reports and persistence.
//! - [`data`]: synthetic blobs, IDX and CSV ingestion, stratified splits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centroids;
pub mod classifier;
pub(crate) mod codec;
pub mod data;
pub mod error;
pub mod incremental;
pub mod loss;
pub mod netcore;
pub mod trainer;

pub use centroids::{
    centroid_stats, generate_centroids, simplex_centroids, CentroidSet, CentroidStats,
};
pub use classifier::{discriminant_scores, ensemble_predict, predict, subset_predict, Prediction};
pub use data::LabeledDataset;
pub use error::{Error, ErrorCategory, Result};
pub use incremental::{evaluate, EnsembleModel, EvaluationReport};
pub use loss::{pedcc_loss, LossConfig, LossValue};
pub use netcore::{Activation, NetworkModel, NetworkSpec};
pub use trainer::{train_task, TrainConfig, TrainTrace};

/// Global class identifier as it appears in datasets and label maps.
pub type ClassId = u32;
