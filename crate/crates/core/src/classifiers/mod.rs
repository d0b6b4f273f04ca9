//! The eight benchmark classifiers behind one fit / predict / score contract.
//!
//! Scores grow with the preference for the defect class. Probabilistic kinds
//! (KNN, naive Bayes, GP, random forest, MLP) score in `[0, 1]` and predict
//! defect at `score >= 0.5`; margin kinds (both SVMs, AdaBoost) score a
//! signed margin and predict defect at `score >= 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::mlp::{MlpArchitecture, MlpModel, TrainConfig};
use crate::standardize::Standardizer;
use crate::{seed, Error, FeatureDataset, Matrix, Result};

pub mod adaboost;
pub mod forest;
pub mod gp;
pub mod knn;
pub mod naive_bayes;
pub mod svm;

pub use adaboost::{adaboost_round, AdaBoostModel, RoundOutcome, Stump, StumpPool};
pub use forest::{gini_impurity, DecisionTree, ForestConfig, MaxFeatures, RandomForestModel, TreeConfig};
pub use gp::{gp_laplace_fit, GpConfig, GpModel};
pub use knn::{knn_distances, KnnModel};
pub use naive_bayes::GaussianNbModel;
pub use svm::{linear_svm_train, rbf_kernel, rbf_kernel_with, KernelForm, LinearSvmConfig, LinearSvmModel, RbfSvmConfig, RbfSvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    GaussianNb,
    GaussianProcess,
    LinearSvm,
    RbfSvm,
    RandomForest,
    #[serde(rename = "adaboost")]
    AdaBoost,
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 8] = [
        ClassifierKind::Knn,
        ClassifierKind::GaussianNb,
        ClassifierKind::GaussianProcess,
        ClassifierKind::LinearSvm,
        ClassifierKind::RbfSvm,
        ClassifierKind::RandomForest,
        ClassifierKind::AdaBoost,
        ClassifierKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::GaussianNb => "gaussian_nb",
            ClassifierKind::GaussianProcess => "gaussian_process",
            ClassifierKind::LinearSvm => "linear_svm",
            ClassifierKind::RbfSvm => "rbf_svm",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::AdaBoost => "adaboost",
            ClassifierKind::Mlp => "mlp",
        }
    }

    /// Row label used in benchmark tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "Nearest Neighbors",
            ClassifierKind::GaussianNb => "Naive Bayes",
            ClassifierKind::GaussianProcess => "Gaussian Process",
            ClassifierKind::LinearSvm => "Linear SVM",
            ClassifierKind::RbfSvm => "RBF SVM",
            ClassifierKind::RandomForest => "Random Forest",
            ClassifierKind::AdaBoost => "AdaBoost",
            ClassifierKind::Mlp => "Neural Network",
        }
    }

    /// Whether scores are probabilities (threshold 0.5) rather than margins
    /// (threshold 0).
    pub fn is_probabilistic(self) -> bool {
        !matches!(
            self,
            ClassifierKind::LinearSvm | ClassifierKind::RbfSvm | ClassifierKind::AdaBoost
        )
    }

    pub fn decision_point(self) -> f64 {
        if self.is_probabilistic() {
            0.5
        } else {
            0.0
        }
    }

    fn code(self) -> u8 {
        match self {
            ClassifierKind::Knn => 1,
            ClassifierKind::GaussianNb => 2,
            ClassifierKind::GaussianProcess => 3,
            ClassifierKind::LinearSvm => 4,
            ClassifierKind::RbfSvm => 5,
            ClassifierKind::RandomForest => 6,
            ClassifierKind::AdaBoost => 7,
            ClassifierKind::Mlp => 8,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.code() == c)
            .ok_or_else(|| Error::Codec(format!("unknown classifier kind byte {c}")))
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let kind = match norm.as_str() {
            "knn" | "nearest_neighbors" => ClassifierKind::Knn,
            "gaussian_nb" | "nb" | "naive_bayes" => ClassifierKind::GaussianNb,
            "gaussian_process" | "gp" => ClassifierKind::GaussianProcess,
            "linear_svm" => ClassifierKind::LinearSvm,
            "rbf_svm" => ClassifierKind::RbfSvm,
            "random_forest" | "rf" => ClassifierKind::RandomForest,
            "adaboost" => ClassifierKind::AdaBoost,
            "mlp" | "neural_network" => ClassifierKind::Mlp,
            _ => return Err(Error::validation(format!("unknown classifier \"{s}\""))),
        };
        Ok(kind)
    }
}

/// Kind-specific settings. The variant determines the classifier kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparams {
    Knn {
        k: usize,
    },
    GaussianNb {
        var_smoothing: f64,
    },
    GaussianProcess(GpConfig),
    LinearSvm(LinearSvmConfig),
    RbfSvm(RbfSvmConfig),
    RandomForest(ForestConfig),
    #[serde(rename = "adaboost")]
    AdaBoost {
        n_rounds: usize,
    },
    Mlp {
        hidden: Vec<usize>,
        train: TrainConfig,
    },
}

impl Hyperparams {
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::Knn => Hyperparams::Knn { k: 2 },
            ClassifierKind::GaussianNb => Hyperparams::GaussianNb { var_smoothing: 1e-9 },
            ClassifierKind::GaussianProcess => Hyperparams::GaussianProcess(GpConfig::default()),
            ClassifierKind::LinearSvm => Hyperparams::LinearSvm(LinearSvmConfig::default()),
            ClassifierKind::RbfSvm => Hyperparams::RbfSvm(RbfSvmConfig::default()),
            ClassifierKind::RandomForest => Hyperparams::RandomForest(ForestConfig::default()),
            ClassifierKind::AdaBoost => Hyperparams::AdaBoost { n_rounds: 50 },
            ClassifierKind::Mlp => Hyperparams::Mlp {
                hidden: vec![256, 128],
                train: TrainConfig::default(),
            },
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Hyperparams::Knn { .. } => ClassifierKind::Knn,
            Hyperparams::GaussianNb { .. } => ClassifierKind::GaussianNb,
            Hyperparams::GaussianProcess(_) => ClassifierKind::GaussianProcess,
            Hyperparams::LinearSvm(_) => ClassifierKind::LinearSvm,
            Hyperparams::RbfSvm(_) => ClassifierKind::RbfSvm,
            Hyperparams::RandomForest(_) => ClassifierKind::RandomForest,
            Hyperparams::AdaBoost { .. } => ClassifierKind::AdaBoost,
            Hyperparams::Mlp { .. } => ClassifierKind::Mlp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Hyperparams::Knn { k } if *k == 0 => Err(Error::validation("k must be positive")),
            Hyperparams::GaussianNb { var_smoothing } => positive("var_smoothing", *var_smoothing),
            Hyperparams::GaussianProcess(c) => c.validate(),
            Hyperparams::LinearSvm(c) => c.validate(),
            Hyperparams::RbfSvm(c) => c.validate(),
            Hyperparams::RandomForest(c) => c.validate(),
            Hyperparams::AdaBoost { n_rounds } if *n_rounds == 0 => {
                Err(Error::validation("n_rounds must be positive"))
            }
            Hyperparams::Mlp { hidden, train } => {
                if hidden.is_empty() || hidden.contains(&0) {
                    return Err(Error::validation("MLP needs at least one positive hidden size"));
                }
                train.validate()
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub hyperparameters: Hyperparams,
    pub seed: u64,
}

impl ClassifierSpec {
    /// Default settings for a kind (k = 2, GP length scale 1, 10 trees,
    /// 50 boosting rounds, ...).
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        ClassifierSpec {
            hyperparameters: Hyperparams::default_for(kind),
            seed,
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        self.hyperparameters.kind()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FittedState {
    Knn(KnnModel),
    GaussianNb(GaussianNbModel),
    GaussianProcess(GpModel),
    LinearSvm(LinearSvmModel),
    RbfSvm(RbfSvmModel),
    RandomForest(RandomForestModel),
    AdaBoost(AdaBoostModel),
    Mlp(MlpModel),
}

/// A fitted classifier. Immutable; `predict` and `score` are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    spec: ClassifierSpec,
    feature_dim: usize,
    scaler: Option<Standardizer>,
    state: FittedState,
}

fn require_both_classes(kind: ClassifierKind, train: &FeatureDataset) -> Result<()> {
    if train.has_both_classes() {
        Ok(())
    } else {
        Err(Error::DegenerateTrainingSet(format!(
            "{kind} needs both classes in the training set, got counts {:?}",
            train.class_counts()
        )))
    }
}

/// Fits a classifier. Deterministic given `(spec, train)`.
pub fn fit(spec: &ClassifierSpec, train: &FeatureDataset) -> Result<TrainedModel> {
    spec.hyperparameters.validate()?;
    if train.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    let kind = spec.kind();
    let x = train.features();
    let y = train.labels();
    let (scaler, state) = match &spec.hyperparameters {
        Hyperparams::Knn { k } => (None, FittedState::Knn(KnnModel::fit(train, *k)?)),
        Hyperparams::GaussianNb { var_smoothing } => (
            None,
            FittedState::GaussianNb(GaussianNbModel::fit(&x.to_f64(), y, *var_smoothing)?),
        ),
        Hyperparams::GaussianProcess(cfg) => {
            require_both_classes(kind, train)?;
            let s = Standardizer::fit(x);
            let z = s.transform(x)?;
            (Some(s), FittedState::GaussianProcess(gp_laplace_fit(&z, y, cfg)?))
        }
        Hyperparams::LinearSvm(cfg) => {
            require_both_classes(kind, train)?;
            let s = Standardizer::fit(x);
            let z = s.transform(x)?;
            (Some(s), FittedState::LinearSvm(LinearSvmModel::train(&z, y, cfg, spec.seed)?))
        }
        Hyperparams::RbfSvm(cfg) => {
            require_both_classes(kind, train)?;
            let s = Standardizer::fit(x);
            let z = s.transform(x)?;
            (Some(s), FittedState::RbfSvm(RbfSvmModel::train(&z, y, cfg, spec.seed)?))
        }
        Hyperparams::RandomForest(cfg) => (
            None,
            FittedState::RandomForest(RandomForestModel::fit(x, y, cfg, spec.seed)?),
        ),
        Hyperparams::AdaBoost { n_rounds } => {
            require_both_classes(kind, train)?;
            (None, FittedState::AdaBoost(AdaBoostModel::fit(x, y, *n_rounds)?))
        }
        Hyperparams::Mlp { hidden, train: cfg } => {
            require_both_classes(kind, train)?;
            let s = Standardizer::fit(x);
            let z = s.transform(x)?;
            let arch = MlpArchitecture::new(x.cols(), hidden, seed::derive(spec.seed, 0));
            let cfg = TrainConfig {
                shuffle_seed: seed::derive(spec.seed, 1),
                ..cfg.clone()
            };
            let model = MlpModel::init(&arch)?.train(&z, y, &cfg)?;
            (Some(s), FittedState::Mlp(model))
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        feature_dim: x.cols(),
        scaler,
        state,
    })
}

impl TrainedModel {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn kind(&self) -> ClassifierKind {
        self.spec.kind()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn check_dim(&self, features: &Matrix<f32>) -> Result<()> {
        if features.cols() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: features.cols(),
            });
        }
        Ok(())
    }

    fn prepared(&self, features: &Matrix<f32>) -> Result<Matrix<f64>> {
        match &self.scaler {
            Some(s) => s.transform(features),
            None => Ok(features.to_f64()),
        }
    }

    /// Real-valued defect preference per row.
    pub fn score(&self, features: &Matrix<f32>) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        let x = self.prepared(features)?;
        let scores = match &self.state {
            FittedState::Knn(m) => x.iter_rows().map(|r| m.score_row(r)).collect(),
            FittedState::GaussianNb(m) => x.iter_rows().map(|r| m.posterior(r)[1]).collect(),
            FittedState::GaussianProcess(m) => x.iter_rows().map(|r| m.predict_proba(r)).collect(),
            FittedState::LinearSvm(m) => x.iter_rows().map(|r| m.decision(r)).collect(),
            FittedState::RbfSvm(m) => x.iter_rows().map(|r| m.decision(r)).collect(),
            FittedState::RandomForest(m) => x.iter_rows().map(|r| m.score_row(r)).collect(),
            FittedState::AdaBoost(m) => x.iter_rows().map(|r| m.decision(r)).collect(),
            FittedState::Mlp(m) => {
                let p = m.forward_batch(&x)?;
                (0..p.rows()).map(|r| p.get(r, 1)).collect()
            }
        };
        Ok(scores)
    }

    /// Labels: 1 iff the score reaches the kind's decision point.
    pub fn predict(&self, features: &Matrix<f32>) -> Result<Vec<u8>> {
        let point = self.kind().decision_point();
        Ok(self
            .score(features)?
            .into_iter()
            .map(|s| u8::from(s >= point))
            .collect())
    }

    /// Serializes to a versioned binary blob (see [`crate::codec`]).
    pub fn to_bytes(&self) -> Vec<u8> {
        let kind = self.kind();
        let mut w = Writer::with_header(kind.code());
        w.u64(self.spec.seed);
        w.usize(self.feature_dim);
        encode_hyperparams(&self.spec.hyperparameters, &mut w);
        match &self.scaler {
            Some(s) => {
                w.u8(1);
                s.encode(&mut w);
            }
            None => w.u8(0),
        }
        match &self.state {
            FittedState::Knn(m) => m.encode(&mut w),
            FittedState::GaussianNb(m) => m.encode(&mut w),
            FittedState::GaussianProcess(m) => m.encode(&mut w),
            FittedState::LinearSvm(m) => m.encode(&mut w),
            FittedState::RbfSvm(m) => m.encode(&mut w),
            FittedState::RandomForest(m) => m.encode(&mut w),
            FittedState::AdaBoost(m) => m.encode(&mut w),
            FittedState::Mlp(m) => m.encode(&mut w),
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let kind = ClassifierKind::from_code(r.header()?)?;
        let seed = r.u64()?;
        let feature_dim = r.usize()?;
        let hyperparameters = decode_hyperparams(kind, &mut r)?;
        let scaler = match r.u8()? {
            0 => None,
            1 => Some(Standardizer::decode(&mut r)?),
            b => return Err(Error::Codec(format!("bad scaler flag {b}"))),
        };
        let state = match kind {
            ClassifierKind::Knn => FittedState::Knn(KnnModel::decode(&mut r)?),
            ClassifierKind::GaussianNb => FittedState::GaussianNb(GaussianNbModel::decode(&mut r)?),
            ClassifierKind::GaussianProcess => FittedState::GaussianProcess(GpModel::decode(&mut r)?),
            ClassifierKind::LinearSvm => FittedState::LinearSvm(LinearSvmModel::decode(&mut r)?),
            ClassifierKind::RbfSvm => FittedState::RbfSvm(RbfSvmModel::decode(&mut r)?),
            ClassifierKind::RandomForest => FittedState::RandomForest(RandomForestModel::decode(&mut r, feature_dim)?),
            ClassifierKind::AdaBoost => FittedState::AdaBoost(AdaBoostModel::decode(&mut r)?),
            ClassifierKind::Mlp => FittedState::Mlp(MlpModel::decode(&mut r)?),
        };
        r.finish()?;
        Ok(TrainedModel {
            spec: ClassifierSpec { hyperparameters, seed },
            feature_dim,
            scaler,
            state,
        })
    }
}

pub(crate) fn encode_train_config(c: &TrainConfig, w: &mut Writer) {
    w.usize(c.epochs);
    w.usize(c.batch_size);
    w.f64(c.learning_rate);
    w.u8(match c.optimizer {
        crate::mlp::Optimizer::Adam => 0,
        crate::mlp::Optimizer::Sgd => 1,
    });
    w.u64(c.shuffle_seed);
}

pub(crate) fn decode_train_config(r: &mut Reader) -> Result<TrainConfig> {
    Ok(TrainConfig {
        epochs: r.usize()?,
        batch_size: r.usize()?,
        learning_rate: r.f64()?,
        optimizer: match r.u8()? {
            0 => crate::mlp::Optimizer::Adam,
            1 => crate::mlp::Optimizer::Sgd,
            b => return Err(Error::Codec(format!("bad optimizer code {b}"))),
        },
        shuffle_seed: r.u64()?,
    })
}

fn encode_hyperparams(h: &Hyperparams, w: &mut Writer) {
    match h {
        Hyperparams::Knn { k } => w.usize(*k),
        Hyperparams::GaussianNb { var_smoothing } => w.f64(*var_smoothing),
        Hyperparams::GaussianProcess(c) => {
            w.f64(c.length_scale);
            w.f64(c.jitter);
            w.usize(c.max_newton_iters);
            w.f64(c.newton_tol);
        }
        Hyperparams::LinearSvm(c) => {
            w.f64(c.reg_c);
            w.usize(c.epochs);
        }
        Hyperparams::RbfSvm(c) => {
            w.f64(c.reg_c);
            w.f64(c.sigma.unwrap_or(f64::NAN));
            w.u8(c.kernel_form.code());
            w.usize(c.max_epochs);
            w.f64(c.tol);
        }
        Hyperparams::RandomForest(c) => c.encode(w),
        Hyperparams::AdaBoost { n_rounds } => w.usize(*n_rounds),
        Hyperparams::Mlp { hidden, train } => {
            w.usizes(hidden);
            encode_train_config(train, w);
        }
    }
}

fn decode_hyperparams(kind: ClassifierKind, r: &mut Reader) -> Result<Hyperparams> {
    Ok(match kind {
        ClassifierKind::Knn => Hyperparams::Knn { k: r.usize()? },
        ClassifierKind::GaussianNb => Hyperparams::GaussianNb {
            var_smoothing: r.f64()?,
        },
        ClassifierKind::GaussianProcess => Hyperparams::GaussianProcess(GpConfig {
            length_scale: r.f64()?,
            jitter: r.f64()?,
            max_newton_iters: r.usize()?,
            newton_tol: r.f64()?,
        }),
        ClassifierKind::LinearSvm => Hyperparams::LinearSvm(LinearSvmConfig {
            reg_c: r.f64()?,
            epochs: r.usize()?,
        }),
        ClassifierKind::RbfSvm => {
            let reg_c = r.f64()?;
            let sigma = r.f64()?;
            Hyperparams::RbfSvm(RbfSvmConfig {
                reg_c,
                sigma: (!sigma.is_nan()).then_some(sigma),
                kernel_form: KernelForm::from_code(r.u8()?)?,
                max_epochs: r.usize()?,
                tol: r.f64()?,
            })
        }
        ClassifierKind::RandomForest => Hyperparams::RandomForest(ForestConfig::decode(r)?),
        ClassifierKind::AdaBoost => Hyperparams::AdaBoost { n_rounds: r.usize()? },
        ClassifierKind::Mlp => Hyperparams::Mlp {
            hidden: r.usizes()?,
            train: decode_train_config(r)?,
        },
    })
}
