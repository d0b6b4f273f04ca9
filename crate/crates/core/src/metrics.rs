//! Binary classification metrics (defect = positive) and multi-run summaries.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, DEFECT, OK};

/// Confusion counts with defect as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryConfusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl BinaryConfusion {
    pub fn from_predictions(predictions: &[u8], truths: &[u8]) -> Result<Self> {
        if predictions.len() != truths.len() {
            return Err(Error::validation(format!(
                "{} predictions for {} truths",
                predictions.len(),
                truths.len()
            )));
        }
        if predictions.is_empty() {
            return Err(Error::validation("no predictions to evaluate"));
        }
        let mut c = BinaryConfusion::default();
        for (&p, &t) in predictions.iter().zip(truths) {
            match (p == DEFECT, t == DEFECT) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.r#fn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }

    pub fn metrics(&self) -> BinaryMetrics {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        BinaryMetrics {
            accuracy: (self.tp + self.tn) as f64 / self.total() as f64,
            sensitivity: ratio(self.tp, self.tp + self.r#fn),
            specificity: ratio(self.tn, self.tn + self.fp),
        }
    }
}

/// Accuracy, sensitivity and specificity. Ratios with a zero denominator are
/// `None` rather than 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

pub fn binary_metrics(predictions: &[u8], truths: &[u8]) -> Result<BinaryMetrics> {
    Ok(BinaryConfusion::from_predictions(predictions, truths)?.metrics())
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a random defect outscores a random non-defect, ties counting ½.
/// Computed from mid-ranks in O(n log n).
pub fn auc(scores: &[f64], truths: &[u8]) -> Result<f64> {
    if scores.len() != truths.len() {
        return Err(Error::validation(format!(
            "{} scores for {} truths",
            scores.len(),
            truths.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("AUC scores contain NaN"));
    }
    let n_pos = truths.iter().filter(|&&t| t == DEFECT).count();
    let n_neg = truths.iter().filter(|&&t| t == OK).count();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::validation("AUC is undefined unless both classes are present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // rank sums are kept doubled so mid-ranks stay integral
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share the mid-rank (i+j+2)/2
        let mid2 = (i + j + 2) as u128;
        for &k in &order[i..=j] {
            if truths[k] == DEFECT {
                pos_rank_sum2 += mid2;
            }
        }
        i = j + 1;
    }
    let n_pos = n_pos as u128;
    let u2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Five-number summary plus mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Per-run values of one metric and their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDistribution {
    pub metric: String,
    pub values: Vec<f64>,
    pub summary: Summary,
}

/// Quantile by linear interpolation between order statistics at
/// position `q · (n − 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::validation("cannot summarize an empty list"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("run values must be finite"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        n,
        mean,
        std,
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[n - 1],
    })
}

pub fn aggregate_runs(metric: impl Into<String>, values: &[f64]) -> Result<RunDistribution> {
    Ok(RunDistribution {
        metric: metric.into(),
        values: values.to_vec(),
        summary: summarize(values)?,
    })
}
