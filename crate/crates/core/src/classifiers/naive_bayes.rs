//! Gaussian naive Bayes.

use crate::codec::{Reader, Writer};
use crate::{Error, Matrix, Result};

/// Per-class priors and per-feature Gaussian parameters. Class index 0 is
/// non-defect, 1 is defect. A class absent from training has prior 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNbModel {
    priors: [f64; 2],
    means: [Vec<f64>; 2],
    variances: [Vec<f64>; 2],
}

impl GaussianNbModel {
    /// Fits class priors, means and variances. Every variance is increased
    /// by `var_smoothing × (largest per-feature variance of the whole
    /// training set)`.
    pub fn fit(x: &Matrix<f64>, labels: &[u8], var_smoothing: f64) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        if n == 0 || labels.len() != n {
            return Err(Error::validation("naive Bayes needs a nonempty labeled training set"));
        }
        let column_var = |rows: &[usize], j: usize| -> (f64, f64) {
            let m = rows.iter().map(|&i| x.get(i, j)).sum::<f64>() / rows.len() as f64;
            let v = rows.iter().map(|&i| (x.get(i, j) - m).powi(2)).sum::<f64>() / rows.len() as f64;
            (m, v)
        };
        let all: Vec<usize> = (0..n).collect();
        let max_var = (0..d).map(|j| column_var(&all, j).1).fold(0.0, f64::max);
        let epsilon = if max_var > 0.0 { var_smoothing * max_var } else { var_smoothing };

        let mut priors = [0.0; 2];
        let mut means: [Vec<f64>; 2] = [vec![0.0; d], vec![0.0; d]];
        let mut variances: [Vec<f64>; 2] = [vec![1.0; d], vec![1.0; d]];
        for class in 0..2u8 {
            let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            if rows.is_empty() {
                continue;
            }
            let c = usize::from(class);
            priors[c] = rows.len() as f64 / n as f64;
            for j in 0..d {
                let (m, v) = column_var(&rows, j);
                means[c][j] = m;
                variances[c][j] = v + epsilon;
            }
        }
        Ok(GaussianNbModel {
            priors,
            means,
            variances,
        })
    }

    /// Builds a model from explicit parameters.
    pub fn from_parameters(priors: [f64; 2], means: [Vec<f64>; 2], variances: [Vec<f64>; 2]) -> Result<Self> {
        let d = means[0].len();
        if means[1].len() != d || variances.iter().any(|v| v.len() != d) {
            return Err(Error::validation("naive Bayes parameter lengths differ"));
        }
        if variances.iter().flatten().any(|&v| !(v > 0.0)) {
            return Err(Error::validation("naive Bayes variances must be positive"));
        }
        if priors.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (priors[0] + priors[1] - 1.0).abs() > 1e-9 {
            return Err(Error::validation("naive Bayes priors must form a distribution"));
        }
        Ok(GaussianNbModel {
            priors,
            means,
            variances,
        })
    }

    fn joint_log_likelihood(&self, c: usize, x: &[f64]) -> f64 {
        if self.priors[c] == 0.0 {
            return f64::NEG_INFINITY;
        }
        let ll: f64 = x
            .iter()
            .zip(&self.means[c])
            .zip(&self.variances[c])
            .map(|((xi, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (xi - m).powi(2) / v))
            .sum();
        self.priors[c].ln() + ll
    }

    /// `P(class | x)` for `[non-defect, defect]`, normalized in log space.
    pub fn posterior(&self, x: &[f64]) -> [f64; 2] {
        let j = [self.joint_log_likelihood(0, x), self.joint_log_likelihood(1, x)];
        let max = j[0].max(j[1]);
        let e = [(j[0] - max).exp(), (j[1] - max).exp()];
        let s = e[0] + e[1];
        [e[0] / s, e[1] / s]
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.f64s(&self.priors);
        for c in 0..2 {
            w.f64s(&self.means[c]);
            w.f64s(&self.variances[c]);
        }
    }

    pub(crate) fn decode(r: &mut Reader) -> Result<Self> {
        let p = r.f64s()?;
        if p.len() != 2 {
            return Err(Error::Codec("naive Bayes needs two priors".into()));
        }
        let m0 = r.f64s()?;
        let v0 = r.f64s()?;
        let m1 = r.f64s()?;
        let v1 = r.f64s()?;
        if [v0.len(), m1.len(), v1.len()].iter().any(|&l| l != m0.len()) {
            return Err(Error::Codec("naive Bayes parameter lengths differ".into()));
        }
        Ok(GaussianNbModel {
            priors: [p[0], p[1]],
            means: [m0, m1],
            variances: [v0, v1],
        })
    }
}
