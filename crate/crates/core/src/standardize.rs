//! Per-feature standardization fitted on training data.

use crate::codec::{Reader, Writer};
use crate::{Error, Matrix, Result};

/// Zero-mean, unit-variance scaling. Constant features keep scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix<f32>) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut mean = vec![0.0; d];
        for row in x.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += f64::from(v);
            }
        }
        let nf = n.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut var = vec![0.0; d];
        for row in x.iter_rows() {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                let c = f64::from(v) - m;
                *s += c * c;
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / nf).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f32]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&v, m), s)| (f64::from(v) - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &Matrix<f32>) -> Result<Matrix<f64>> {
        if x.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.cols(),
            });
        }
        let mut out = Vec::with_capacity(x.rows() * x.cols());
        for row in x.iter_rows() {
            out.extend(self.transform_row(row));
        }
        Matrix::from_vec(x.rows(), x.cols(), out)
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.f64s(&self.mean);
        w.f64s(&self.scale);
    }

    pub(crate) fn decode(r: &mut Reader) -> Result<Self> {
        let mean = r.f64s()?;
        let scale = r.f64s()?;
        if mean.len() != scale.len() {
            return Err(Error::Codec("standardizer length mismatch".into()));
        }
        Ok(Standardizer { mean, scale })
    }
}
