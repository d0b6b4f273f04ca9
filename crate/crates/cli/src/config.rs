//! Experiment configuration: a JSON document whose fields can all be
//! overridden from the command line.

use std::path::{Path, PathBuf};

use castguard_core::dataio::{SplitSpec, SynthSpec};
use castguard_core::uq::{default_threshold_grid, EnsembleConfig, DEFAULT_THRESHOLD};
use castguard_core::{ClassifierKind, Hyperparams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable consulted when no seed is given on the command line
/// or in the config file.
pub const SEED_ENV: &str = "CASTGUARD_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// FMX or CSV feature files. When empty, a synthetic dataset is used.
    pub inputs: Vec<PathBuf>,
    /// Label column name for CSV inputs.
    pub label_column: String,
    /// Synthetic data used when `inputs` is empty.
    pub synth: SynthSpec,
    pub classifiers: Vec<ClassifierKind>,
    /// Replacement settings for individual classifier kinds.
    pub hyperparameters: Vec<Hyperparams>,
    pub runs: usize,
    /// `split.seed` is ignored: every run derives its own split seed.
    pub split: SplitSpec,
    /// `member_seed_base` is an offset added to the seed derived from the
    /// master seed.
    pub ensemble: EnsembleConfig,
    pub threshold: f64,
    pub threshold_grid: Vec<f64>,
    pub histogram_bins: usize,
    /// Train the ensemble on the 2D PCA projection instead of the full
    /// features (pca-map only).
    pub train_on_pca: bool,
    pub out_dir: PathBuf,
    pub master_seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            inputs: Vec::new(),
            label_column: "label".into(),
            synth: SynthSpec::default(),
            classifiers: ClassifierKind::ALL.to_vec(),
            hyperparameters: Vec::new(),
            runs: 100,
            split: SplitSpec::default(),
            ensemble: EnsembleConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            threshold_grid: default_threshold_grid(),
            histogram_bins: 20,
            train_on_pca: false,
            out_dir: PathBuf::from("castguard-out"),
            master_seed: None,
            jobs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The master seed, with `CASTGUARD_SEED` as the fallback and 0 last.
    pub fn resolve_seed(&mut self) -> Result<u64, CliError> {
        if let Some(s) = self.master_seed {
            return Ok(s);
        }
        let seed = match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
            Err(_) => 0,
        };
        self.master_seed = Some(seed);
        Ok(seed)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.classifiers.is_empty() {
            return bad("at least one classifier is required".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} must lie in (0, 1)", self.threshold));
        }
        if self.threshold_grid.is_empty()
            || self.threshold_grid.iter().any(|t| !(0.0..=1.0).contains(t))
            || self.threshold_grid.windows(2).any(|w| w[0] > w[1])
        {
            return bad("threshold_grid must be a nonempty ascending list within [0, 1]".into());
        }
        if self.histogram_bins < 2 {
            return bad("histogram_bins must be at least 2".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        for h in &self.hyperparameters {
            h.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.split.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.ensemble.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.inputs.is_empty() {
            self.synth.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Settings for `kind`: the last matching override, else the defaults.
    pub fn hyperparams_for(&self, kind: ClassifierKind) -> Hyperparams {
        self.hyperparameters
            .iter()
            .rev()
            .find(|h| h.kind() == kind)
            .cloned()
            .unwrap_or_else(|| Hyperparams::default_for(kind))
    }
}
