//! Uncertainty-aware binary defect classification over CNN feature matrices.
//!
//! The crate covers everything downstream of feature extraction:
//!
//! * [`dataio`]: the FMX feature-matrix format, CSV ingest, stratified
//!   splitting and a synthetic two-cluster generator.
//! * [`classifiers`]: seven classical classifiers plus the MLP behind one
//!   fit/predict/score contract.
//! * [`mlp`]: a from-scratch multi-layer perceptron with backpropagation.
//! * [`uq`]: deep-ensemble predictive entropy, the UQ confusion matrix and
//!   uncertainty accuracy.
//! * [`metrics`]: accuracy, sensitivity, specificity, rank-based AUC and
//!   multi-run summaries.
//! * [`pca`]: covariance-free principal component analysis for 2D maps.
//!
//! Label convention everywhere: `1` = defect (the positive class), `0` = ok.

pub mod classifiers;
pub mod codec;
pub mod dataio;
mod error;
pub mod linalg;
mod matrix;
pub mod metrics;
pub mod mlp;
pub mod pca;
pub mod seed;
pub mod standardize;
pub mod uq;

pub use classifiers::{ClassifierKind, ClassifierSpec, Hyperparams, TrainedModel};
pub use dataio::{FeatureDataset, SplitSpec, SynthSpec};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use metrics::{BinaryConfusion, BinaryMetrics, RunDistribution};
pub use mlp::{MlpArchitecture, MlpModel, TrainConfig};
pub use pca::PcaModel;
pub use uq::{EnsembleConfig, EnsembleModel, UqAssessment, UqConfusion};

/// Label value of the defect (positive) class.
pub const DEFECT: u8 = 1;
/// Label value of the non-defect class.
pub const OK: u8 = 0;
