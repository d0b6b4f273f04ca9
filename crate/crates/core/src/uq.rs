//! Deep-ensemble uncertainty quantification.
//!
//! An ensemble of independently trained MLPs is averaged into a mean class
//! distribution per sample. Its base-2 entropy measures member disagreement:
//! 0 when all members agree with full confidence, 1 at a 50/50 split. A
//! prediction is *certain* when the entropy is strictly below a threshold.
//! Crossing certainty with correctness gives the UQ confusion matrix
//!
//! |           | certain | uncertain |
//! |-----------|---------|-----------|
//! | correct   | TC      | FU        |
//! | incorrect | FC      | TU        |
//!
//! and the uncertainty accuracy `(TC + TU) / total`.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{decode_train_config, encode_train_config};
use crate::codec::{Reader, Writer, KIND_ENSEMBLE};
use crate::standardize::Standardizer;
use crate::{seed, Error, FeatureDataset, Matrix, MlpArchitecture, MlpModel, Result, TrainConfig};

/// Operating threshold used whenever a single threshold is needed.
pub const DEFAULT_THRESHOLD: f64 = 0.4;

/// Tolerance for accepting a vector as a probability distribution.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// The grid 0.1, 0.2, …, 0.9.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=9).map(|i| f64::from(i) / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub n_members: usize,
    /// Hidden-layer counts a member may draw.
    pub depth_choices: Vec<usize>,
    /// Inclusive width range for each hidden-layer position.
    pub width_ranges: Vec<(usize, usize)>,
    pub member_seed_base: u64,
    pub train_config: TrainConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_members: 10,
            depth_choices: vec![2, 3],
            width_ranges: vec![(256, 512), (128, 256), (64, 128)],
            member_seed_base: 0,
            train_config: TrainConfig::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_members < 2 {
            return Err(Error::validation("an ensemble needs at least 2 members"));
        }
        if self.depth_choices.is_empty() {
            return Err(Error::validation("depth_choices must not be empty"));
        }
        for &d in &self.depth_choices {
            if d == 0 || d > self.width_ranges.len() {
                return Err(Error::validation(format!(
                    "depth {d} needs between 1 and {} width ranges",
                    self.width_ranges.len()
                )));
            }
        }
        for &(lo, hi) in &self.width_ranges {
            if lo == 0 || lo >= hi {
                return Err(Error::validation(format!("width range ({lo}, {hi}) must satisfy 0 < low < high")));
            }
        }
        self.train_config.validate()
    }

    /// Seed that governs member `index`.
    pub fn member_seed(&self, index: usize) -> u64 {
        self.member_seed_base.wrapping_add(index as u64)
    }

    /// Architecture of member `index`: a depth drawn from `depth_choices`,
    /// then one width per layer from the matching range.
    pub fn member_architecture(&self, index: usize, input_dim: usize) -> MlpArchitecture {
        let s = self.member_seed(index);
        let mut rng = seed::rng(s);
        let depth = self.depth_choices[rng.random_range(0..self.depth_choices.len())];
        let hidden: Vec<usize> = self.width_ranges[..depth]
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..=hi))
            .collect();
        MlpArchitecture::new(input_dim, &hidden, seed::derive(s, 0))
    }

    fn member_train_config(&self, index: usize) -> TrainConfig {
        TrainConfig {
            shuffle_seed: seed::derive(self.member_seed(index), 1),
            ..self.train_config.clone()
        }
    }

    fn encode(&self, w: &mut Writer) {
        w.usize(self.n_members);
        w.usizes(&self.depth_choices);
        let flat: Vec<usize> = self.width_ranges.iter().flat_map(|&(a, b)| [a, b]).collect();
        w.usizes(&flat);
        w.u64(self.member_seed_base);
        encode_train_config(&self.train_config, w);
    }

    fn decode(r: &mut Reader) -> Result<Self> {
        let n_members = r.usize()?;
        let depth_choices = r.usizes()?;
        let flat = r.usizes()?;
        if flat.len() % 2 != 0 {
            return Err(Error::Codec("odd width range list".into()));
        }
        Ok(EnsembleConfig {
            n_members,
            depth_choices,
            width_ranges: flat.chunks(2).map(|c| (c[0], c[1])).collect(),
            member_seed_base: r.u64()?,
            train_config: decode_train_config(r)?,
        })
    }
}

/// Trained members plus the feature standardization they share.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    members: Vec<MlpModel>,
    config: EnsembleConfig,
    scaler: Option<Standardizer>,
}

/// Trains every member on the full (standardized) training set. Members run
/// in parallel; each derives all randomness from its own seed, so results do
/// not depend on scheduling.
pub fn ensemble_train(config: &EnsembleConfig, train: &FeatureDataset) -> Result<EnsembleModel> {
    config.validate()?;
    if !train.has_both_classes() {
        let (ok, defect) = train.class_counts();
        return Err(Error::DegenerateTrainingSet(format!(
            "ensemble training needs both classes (ok={ok}, defect={defect})"
        )));
    }
    let scaler = Standardizer::fit(train.features());
    let z = scaler.transform(train.features())?;
    let members = (0..config.n_members)
        .into_par_iter()
        .map(|i| {
            let arch = config.member_architecture(i, train.feature_dim());
            MlpModel::init(&arch)
                .and_then(|m| m.train(&z, train.labels(), &config.member_train_config(i)))
                .map_err(|e| Error::Member {
                    index: i,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel {
        members,
        config: config.clone(),
        scaler: Some(scaler),
    })
}

/// Running mean, so averaging identical vectors reproduces them exactly.
fn accumulate_mean(mean: &mut [f64; 2], p: [f64; 2], count: usize) {
    let k = count as f64;
    for c in 0..2 {
        mean[c] += (p[c] - mean[c]) / k;
    }
}

impl EnsembleModel {
    /// Assembles an ensemble from already trained members. With no scaler
    /// the members see raw features.
    pub fn from_members(members: Vec<MlpModel>, config: EnsembleConfig, scaler: Option<Standardizer>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::validation("an ensemble needs at least one member"));
        };
        let dim = first.input_dim();
        if let Some(bad) = members.iter().find(|m| m.input_dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.input_dim(),
            });
        }
        if let Some(s) = &scaler {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: s.dim(),
                });
            }
        }
        Ok(EnsembleModel { members, config, scaler })
    }

    pub fn members(&self) -> &[MlpModel] {
        &self.members
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    fn prepare(&self, x: &Matrix<f32>) -> Result<Matrix<f64>> {
        if x.cols() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                actual: x.cols(),
            });
        }
        match &self.scaler {
            Some(s) => s.transform(x),
            None => Ok(x.to_f64()),
        }
    }

    /// Mean member distribution for every row.
    pub fn mean_probs(&self, x: &Matrix<f32>) -> Result<Vec<[f64; 2]>> {
        let z = self.prepare(x)?;
        let outputs = self
            .members
            .par_iter()
            .map(|m| m.forward_batch(&z))
            .collect::<Result<Vec<_>>>()?;
        let mut means = vec![[0.0; 2]; x.rows()];
        for (k, out) in outputs.iter().enumerate() {
            for (i, mean) in means.iter_mut().enumerate() {
                accumulate_mean(mean, [out.get(i, 0), out.get(i, 1)], k + 1);
            }
        }
        Ok(means)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(KIND_ENSEMBLE);
        self.config.encode(&mut w);
        match &self.scaler {
            None => w.u8(0),
            Some(s) => {
                w.u8(1);
                s.encode(&mut w);
            }
        }
        w.usize(self.members.len());
        for m in &self.members {
            m.encode(&mut w);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let kind = r.header()?;
        if kind != KIND_ENSEMBLE {
            return Err(Error::Codec(format!("blob kind {kind} is not an ensemble")));
        }
        let config = EnsembleConfig::decode(&mut r)?;
        let scaler = match r.u8()? {
            0 => None,
            1 => Some(Standardizer::decode(&mut r)?),
            b => return Err(Error::Codec(format!("bad scaler flag {b}"))),
        };
        let n = r.usize()?;
        let members = (0..n).map(|_| MlpModel::decode(&mut r)).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        EnsembleModel::from_members(members, config, scaler).map_err(|e| Error::Codec(e.to_string()))
    }
}

/// Mean member distribution for one feature vector.
pub fn ensemble_mean(model: &EnsembleModel, x: &[f32]) -> Result<[f64; 2]> {
    let row = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(model.mean_probs(&row)?[0])
}

/// Arithmetic mean of member distributions in member order.
pub fn mean_of(distributions: &[[f64; 2]]) -> [f64; 2] {
    let mut mean = [0.0; 2];
    for (k, &p) in distributions.iter().enumerate() {
        accumulate_mean(&mut mean, p, k + 1);
    }
    mean
}

/// Base-2 Shannon entropy `−Σ p log₂ p` with `0 log 0 = 0`, normalized by
/// `log₂ K` for `K > 2` classes so the result lies in `[0, 1]`.
pub fn predictive_entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::validation("entropy of an empty distribution"));
    }
    let sum: f64 = p.iter().sum();
    let in_range = p.iter().all(|&v| v.is_finite() && v >= -SIMPLEX_TOLERANCE);
    if !in_range || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::validation(format!("{p:?} is not a probability vector")));
    }
    if p.len() == 1 {
        return Ok(0.0);
    }
    let h: f64 = -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>();
    let norm = if p.len() == 2 { 1.0 } else { (p.len() as f64).log2() };
    // adding zero turns the -0.0 of a one-hot vector into +0.0
    Ok((h / norm).clamp(0.0, 1.0) + 0.0)
}

/// Per-sample outcome of an assessment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UqRecord {
    pub mean_probs: [f64; 2],
    pub entropy: f64,
    pub predicted: u8,
    pub true_label: u8,
    pub certain: bool,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UqAssessment {
    records: Vec<UqRecord>,
    threshold: f64,
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("threshold {t} must lie in (0, 1)")))
    }
}

impl UqAssessment {
    /// Builds an assessment from mean distributions and true labels. An
    /// argmax tie predicts defect.
    pub fn from_probs(probs: &[[f64; 2]], truths: &[u8], threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        if probs.is_empty() {
            return Err(Error::validation("cannot assess an empty test set"));
        }
        if probs.len() != truths.len() {
            return Err(Error::DimensionMismatch {
                expected: probs.len(),
                actual: truths.len(),
            });
        }
        let records = probs
            .iter()
            .zip(truths)
            .map(|(&p, &t)| {
                let entropy = predictive_entropy(&p)?;
                let predicted = u8::from(p[1] >= p[0]);
                Ok(UqRecord {
                    mean_probs: p,
                    entropy,
                    predicted,
                    true_label: t,
                    certain: entropy < threshold,
                    correct: predicted == t,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UqAssessment { records, threshold })
    }

    pub fn records(&self) -> &[UqRecord] {
        &self.records
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.entropy).collect()
    }

    pub fn correctness(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.correct).collect()
    }

    pub fn predictions(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.predicted).collect()
    }

    /// Mean entropy of the (correct, incorrect) groups; `None` for an empty
    /// group.
    pub fn group_mean_entropy(&self) -> (Option<f64>, Option<f64>) {
        let mean = |want: bool| {
            let v: Vec<f64> = self.records.iter().filter(|r| r.correct == want).map(|r| r.entropy).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        (mean(true), mean(false))
    }

    /// Writes the per-sample table
    /// `sample_index,p_defect,entropy,predicted,true,certain,correct`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv {
            path: "<assessment>".into(),
            detail: e.to_string(),
        };
        w.write_record(["sample_index", "p_defect", "entropy", "predicted", "true", "certain", "correct"])
            .map_err(csv_err)?;
        for (i, r) in self.records.iter().enumerate() {
            w.write_record([
                i.to_string(),
                r.mean_probs[1].to_string(),
                r.entropy.to_string(),
                r.predicted.to_string(),
                r.true_label.to_string(),
                u8::from(r.certain).to_string(),
                u8::from(r.correct).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<assessment>", e))
    }
}

/// Assesses a labeled test set at `threshold` in `(0, 1)`.
pub fn assess(model: &EnsembleModel, test: &FeatureDataset, threshold: f64) -> Result<UqAssessment> {
    check_threshold(threshold)?;
    if test.is_empty() {
        return Err(Error::validation("cannot assess an empty test set"));
    }
    let probs = model.mean_probs(test.features())?;
    UqAssessment::from_probs(&probs, test.labels(), threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UqConfusion {
    pub tc: usize,
    pub tu: usize,
    pub fu: usize,
    pub fc: usize,
    pub threshold: f64,
}

impl UqConfusion {
    /// Counts from parallel correctness and certainty flags.
    pub fn from_flags(correct: &[bool], certain: &[bool], threshold: f64) -> Self {
        let mut c = UqConfusion {
            tc: 0,
            tu: 0,
            fu: 0,
            fc: 0,
            threshold,
        };
        for (&ok, &sure) in correct.iter().zip(certain) {
            match (ok, sure) {
                (true, true) => c.tc += 1,
                (false, false) => c.tu += 1,
                (true, false) => c.fu += 1,
                (false, true) => c.fc += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tc + self.tu + self.fu + self.fc
    }

    pub fn certain(&self) -> usize {
        self.tc + self.fc
    }
}

pub fn uq_confusion(assessment: &UqAssessment) -> UqConfusion {
    let certain: Vec<bool> = assessment.records.iter().map(|r| r.certain).collect();
    UqConfusion::from_flags(&assessment.correctness(), &certain, assessment.threshold)
}

/// `(TC + TU) / total`.
pub fn uncertainty_accuracy(confusion: &UqConfusion) -> Result<f64> {
    match confusion.total() {
        0 => Err(Error::validation("uncertainty accuracy of zero samples")),
        n => Ok((confusion.tc + confusion.tu) as f64 / n as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub confusion: UqConfusion,
    pub uncertainty_accuracy: f64,
}

/// Re-thresholds fixed entropies at each grid point. Thresholds must be
/// ascending and within `[0, 1]`.
pub fn threshold_sweep(entropies: &[f64], correct: &[bool], thresholds: &[f64]) -> Result<Vec<SweepRow>> {
    if thresholds.is_empty() {
        return Err(Error::validation("threshold sweep needs at least one threshold"));
    }
    if entropies.is_empty() {
        return Err(Error::validation("threshold sweep over zero samples"));
    }
    if entropies.len() != correct.len() {
        return Err(Error::DimensionMismatch {
            expected: entropies.len(),
            actual: correct.len(),
        });
    }
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) || thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::validation("thresholds must be ascending within [0, 1]"));
    }
    thresholds
        .iter()
        .map(|&t| {
            let certain: Vec<bool> = entropies.iter().map(|&h| h < t).collect();
            let confusion = UqConfusion::from_flags(correct, &certain, t);
            Ok(SweepRow {
                threshold: t,
                confusion,
                uncertainty_accuracy: uncertainty_accuracy(&confusion)?,
            })
        })
        .collect()
}

/// Entropy counts over `n_bins` equal bins of `[0, 1]`, split by
/// correctness. Entropy 1 falls in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyHistogram {
    pub correct: Vec<usize>,
    pub incorrect: Vec<usize>,
}

impl EntropyHistogram {
    pub fn n_bins(&self) -> usize {
        self.correct.len()
    }

    /// `(low, high)` edges of bin `i`.
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let n = self.n_bins() as f64;
        (i as f64 / n, (i + 1) as f64 / n)
    }
}

pub fn bin_index(entropy: f64, n_bins: usize) -> usize {
    ((entropy.clamp(0.0, 1.0) * n_bins as f64).floor() as usize).min(n_bins - 1)
}

pub fn entropy_histogram(assessment: &UqAssessment, n_bins: usize) -> Result<EntropyHistogram> {
    if n_bins < 2 {
        return Err(Error::validation("histograms need at least 2 bins"));
    }
    let mut h = EntropyHistogram {
        correct: vec![0; n_bins],
        incorrect: vec![0; n_bins],
    };
    for r in &assessment.records {
        let b = bin_index(r.entropy, n_bins);
        if r.correct {
            h.correct[b] += 1;
        } else {
            h.incorrect[b] += 1;
        }
    }
    Ok(h)
}
