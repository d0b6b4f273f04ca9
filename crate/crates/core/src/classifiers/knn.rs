//! k-nearest neighbors with Euclidean distance and majority vote.

use crate::codec::{Reader, Writer};
use crate::{Error, FeatureDataset, Matrix, Result, DEFECT};

/// Score offset that breaks an even vote toward the nearest neighbor.
pub const TIE_BIAS: f64 = 1e-6;

fn euclidean(query: &[f64], row: &[f32]) -> f64 {
    query
        .iter()
        .zip(row)
        .map(|(q, &r)| {
            let d = q - f64::from(r);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn nearest(query: &[f64], features: &Matrix<f32>, k: usize) -> Result<Vec<(usize, f64)>> {
    if k == 0 || k > features.rows() {
        return Err(Error::validation(format!(
            "k = {k} must lie in 1..={} (training rows)",
            features.rows()
        )));
    }
    if query.len() != features.cols() {
        return Err(Error::DimensionMismatch {
            expected: features.cols(),
            actual: query.len(),
        });
    }
    let mut d: Vec<(usize, f64)> = features
        .iter_rows()
        .enumerate()
        .map(|(i, row)| (i, euclidean(query, row)))
        .collect();
    let by_distance = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, by_distance);
        d.truncate(k);
    }
    d.sort_by(by_distance);
    Ok(d)
}

/// The `k` training rows closest to `query`, ascending by Euclidean
/// distance, ties broken by lower row index.
pub fn knn_distances(query: &[f64], train: &FeatureDataset, k: usize) -> Result<Vec<(usize, f64)>> {
    nearest(query, train.features(), k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    features: Matrix<f32>,
    labels: Vec<u8>,
}

impl KnnModel {
    pub fn fit(train: &FeatureDataset, k: usize) -> Result<Self> {
        if k == 0 || k > train.len() {
            return Err(Error::validation(format!(
                "k = {k} must lie in 1..={} (training rows)",
                train.len()
            )));
        }
        Ok(KnnModel {
            k,
            features: train.features().clone(),
            labels: train.labels().to_vec(),
        })
    }

    /// Fraction of the k neighbors that are defects. An exactly even vote is
    /// nudged by [`TIE_BIAS`] toward the nearest neighbor's label.
    pub fn score_row(&self, x: &[f64]) -> f64 {
        let nn = nearest(x, &self.features, self.k).expect("dimension checked by caller");
        let votes = nn.iter().filter(|(i, _)| self.labels[*i] == DEFECT).count();
        let frac = votes as f64 / self.k as f64;
        if 2 * votes == self.k {
            if self.labels[nn[0].0] == DEFECT {
                frac + TIE_BIAS
            } else {
                frac - TIE_BIAS
            }
        } else {
            frac
        }
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.usize(self.k);
        w.usize(self.features.rows());
        w.usize(self.features.cols());
        w.f64s(&self.features.as_slice().iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
        w.bytes(&self.labels);
    }

    pub(crate) fn decode(r: &mut Reader) -> Result<Self> {
        let k = r.usize()?;
        let rows = r.usize()?;
        let cols = r.usize()?;
        let data = r.f64s()?.into_iter().map(|v| v as f32).collect();
        let features = Matrix::from_vec(rows, cols, data).map_err(|e| Error::Codec(e.to_string()))?;
        let labels = r.bytes()?;
        if labels.len() != rows || k == 0 || k > rows {
            return Err(Error::Codec("inconsistent KNN payload".into()));
        }
        Ok(KnnModel { k, features, labels })
    }
}
