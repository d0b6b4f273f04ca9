//! Soft-margin support vector machines.
//!
//! * Linear: primal stochastic subgradient descent on
//!   `λ/2 ‖w‖² + mean hinge loss` with `λ = 1 / (C n)` and step `1 / (λ t)`.
//!   The bias is learned as the weight of a constant input feature.
//! * RBF: dual coordinate ascent over `0 ≤ α_i ≤ C`, with the bias absorbed
//!   by adding 1 to the kernel.
//!
//! Labels map to `+1` (defect) and `−1` (non-defect).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::linalg::{dot, squared_distance};
use crate::{seed, Error, FeatureDataset, Matrix, Result, DEFECT};

/// Largest training set for which the dense RBF kernel is built.
pub const MAX_KERNEL_TRAINING_ROWS: usize = 5000;

/// How the RBF exponent uses the distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    /// `exp(−‖x − y‖² / 2σ²)`
    #[default]
    Squared,
    /// `exp(−‖x − y‖ / 2σ²)`, the distance left unsquared.
    Literal,
}

impl KernelForm {
    pub(crate) fn code(self) -> u8 {
        match self {
            KernelForm::Squared => 0,
            KernelForm::Literal => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(KernelForm::Squared),
            1 => Ok(KernelForm::Literal),
            _ => Err(Error::Codec(format!("unknown kernel form {c}"))),
        }
    }

    #[inline]
    fn from_squared_distance(self, d2: f64, sigma: f64) -> f64 {
        let num = match self {
            KernelForm::Squared => d2,
            KernelForm::Literal => d2.sqrt(),
        };
        (-num / (2.0 * sigma * sigma)).exp()
    }
}

/// Gaussian RBF kernel `exp(−‖x − y‖² / 2σ²)`.
#[inline]
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    KernelForm::Squared.from_squared_distance(squared_distance(x, y), sigma)
}

/// RBF kernel with an explicit exponent form; checks dimensions.
pub fn rbf_kernel_with(x: &[f64], y: &[f64], sigma: f64, form: KernelForm) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::validation("RBF sigma must be positive"));
    }
    Ok(form.from_squared_distance(squared_distance(x, y), sigma))
}

#[inline]
fn sign_label(l: u8) -> f64 {
    if l == DEFECT {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearSvmConfig {
    pub reg_c: f64,
    pub epochs: usize,
}

impl Default for LinearSvmConfig {
    fn default() -> Self {
        LinearSvmConfig {
            reg_c: 1.0,
            epochs: 200,
        }
    }
}

impl LinearSvmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reg_c > 0.0 && self.reg_c.is_finite() && self.epochs > 0 {
            Ok(())
        } else {
            Err(Error::validation("linear SVM needs reg_c > 0 and epochs > 0"))
        }
    }
}

/// Hyperplane `w · x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearSvmModel {
    pub fn train(x: &Matrix<f64>, labels: &[u8], config: &LinearSvmConfig, seed_v: u64) -> Result<Self> {
        config.validate()?;
        let n = x.rows();
        if n == 0 || labels.len() != n {
            return Err(Error::validation("linear SVM needs a nonempty labeled training set"));
        }
        if !(labels.contains(&0) && labels.contains(&1)) {
            return Err(Error::DegenerateTrainingSet("linear SVM needs both classes".into()));
        }
        let d = x.cols();
        let lambda = 1.0 / (config.reg_c * n as f64);
        let radius = 1.0 / lambda.sqrt();
        // w_true = scale · v, last component of v is the bias weight
        let mut v = vec![0.0; d + 1];
        let mut scale = 1.0;
        let mut rng = seed::rng(seed_v);
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0u64;
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let xi = x.row(i);
                let yi = sign_label(labels[i]);
                let margin = yi * scale * (dot(&v[..d], xi) + v[d]);
                let shrink = 1.0 - eta * lambda;
                if shrink <= 0.0 {
                    v.iter_mut().for_each(|c| *c = 0.0);
                    scale = 1.0;
                } else {
                    scale *= shrink;
                }
                if margin < 1.0 {
                    let step = eta * yi / scale;
                    for (c, &xv) in v[..d].iter_mut().zip(xi) {
                        *c += step * xv;
                    }
                    v[d] += step;
                }
                let norm = scale * v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm > radius {
                    scale *= radius / norm;
                }
                if scale < 1e-100 {
                    v.iter_mut().for_each(|c| *c *= scale);
                    scale = 1.0;
                }
            }
        }
        let w: Vec<f64> = v[..d].iter().map(|c| c * scale).collect();
        let b = v[d] * scale;
        Ok(LinearSvmModel { w, b })
    }

    #[inline]
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }

    /// Mean hinge loss `max(0, 1 − y f(x))`.
    pub fn hinge_loss(&self, x: &Matrix<f64>, labels: &[u8]) -> f64 {
        x.iter_rows()
            .zip(labels)
            .map(|(r, &l)| (1.0 - sign_label(l) * self.decision(r)).max(0.0))
            .sum::<f64>()
            / x.rows() as f64
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.f64s(&self.w);
        w.f64(self.b);
    }

    pub(crate) fn decode(r: &mut Reader) -> Result<Self> {
        Ok(LinearSvmModel {
            w: r.f64s()?,
            b: r.f64()?,
        })
    }
}

/// Trains a linear SVM directly on a dataset's raw features.
pub fn linear_svm_train(train: &FeatureDataset, reg_c: f64, epochs: usize, seed_v: u64) -> Result<LinearSvmModel> {
    LinearSvmModel::train(
        &train.features().to_f64(),
        train.labels(),
        &LinearSvmConfig { reg_c, epochs },
        seed_v,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbfSvmConfig {
    pub reg_c: f64,
    /// Kernel width; `None` uses the median pairwise training distance.
    pub sigma: Option<f64>,
    pub kernel_form: KernelForm,
    pub max_epochs: usize,
    /// Stop once the projected-gradient spread falls below this.
    pub tol: f64,
}

impl Default for RbfSvmConfig {
    fn default() -> Self {
        RbfSvmConfig {
            reg_c: 1.0,
            sigma: None,
            kernel_form: KernelForm::Squared,
            max_epochs: 1000,
            tol: 1e-3,
        }
    }
}

impl RbfSvmConfig {
    pub fn validate(&self) -> Result<()> {
        let sigma_ok = self.sigma.is_none_or(|s| s > 0.0 && s.is_finite());
        if self.reg_c > 0.0 && self.reg_c.is_finite() && self.max_epochs > 0 && self.tol > 0.0 && sigma_ok {
            Ok(())
        } else {
            Err(Error::validation("RBF SVM needs positive reg_c, sigma, max_epochs and tol"))
        }
    }
}

/// Median of the pairwise Euclidean distances among rows; 1 when all rows
/// coincide.
pub fn median_pairwise_distance(x: &Matrix<f64>) -> f64 {
    let n = x.rows();
    let mut d: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(squared_distance(x.row(i), x.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = crate::metrics::quantile_sorted(&d, 0.5);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Kernel expansion `Σ c_j (k(s_j, x) + 1)` over support vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfSvmModel {
    sigma: f64,
    form: KernelForm,
    support: Matrix<f64>,
    coef: Vec<f64>,
}

impl RbfSvmModel {
    pub fn train(x: &Matrix<f64>, labels: &[u8], config: &RbfSvmConfig, seed_v: u64) -> Result<Self> {
        config.validate()?;
        let n = x.rows();
        if n == 0 || labels.len() != n {
            return Err(Error::validation("RBF SVM needs a nonempty labeled training set"));
        }
        if !(labels.contains(&0) && labels.contains(&1)) {
            return Err(Error::DegenerateTrainingSet("RBF SVM needs both classes".into()));
        }
        if n > MAX_KERNEL_TRAINING_ROWS {
            return Err(Error::TooLarge(format!(
                "RBF kernel matrix for {n} rows exceeds the {MAX_KERNEL_TRAINING_ROWS}-row limit"
            )));
        }
        let mut d2 = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = squared_distance(x.row(i), x.row(j));
                d2.set(i, j, v);
                d2.set(j, i, v);
            }
        }
        let sigma = config.sigma.unwrap_or_else(|| median_pairwise_distance(x));
        let y: Vec<f64> = labels.iter().map(|&l| sign_label(l)).collect();
        // Q_ij = y_i y_j (k_ij + 1)
        let mut q = d2;
        for i in 0..n {
            for j in 0..n {
                let k = config.kernel_form.from_squared_distance(q.get(i, j), sigma) + 1.0;
                q.set(i, j, y[i] * y[j] * k);
            }
        }
        let c = config.reg_c;
        let mut alpha = vec![0.0f64; n];
        let mut q_alpha = vec![0.0f64; n];
        let mut rng = seed::rng(seed_v);
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..config.max_epochs {
            order.shuffle(&mut rng);
            let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
            for &i in &order {
                let g = q_alpha[i] - 1.0;
                let pg = if alpha[i] <= 0.0 {
                    g.min(0.0)
                } else if alpha[i] >= c {
                    g.max(0.0)
                } else {
                    g
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg != 0.0 {
                    let old = alpha[i];
                    alpha[i] = (old - g / q.get(i, i)).clamp(0.0, c);
                    let delta = alpha[i] - old;
                    if delta != 0.0 {
                        for (qa, &qij) in q_alpha.iter_mut().zip(q.row(i)) {
                            *qa += delta * qij;
                        }
                    }
                }
            }
            if pg_max - pg_min < config.tol {
                break;
            }
        }
        let support_idx: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
        Ok(RbfSvmModel {
            sigma,
            form: config.kernel_form,
            support: x.select_rows(&support_idx),
            coef: support_idx.iter().map(|&i| alpha[i] * y[i]).collect(),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter_rows()
            .zip(&self.coef)
            .map(|(s, c)| c * (self.form.from_squared_distance(squared_distance(s, x), self.sigma) + 1.0))
            .sum()
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.f64(self.sigma);
        w.u8(self.form.code());
        w.usize(self.support.rows());
        w.usize(self.support.cols());
        w.f64s(self.support.as_slice());
        w.f64s(&self.coef);
    }

    pub(crate) fn decode(r: &mut Reader) -> Result<Self> {
        let sigma = r.f64()?;
        let form = KernelForm::from_code(r.u8()?)?;
        let rows = r.usize()?;
        let cols = r.usize()?;
        let support = Matrix::from_vec(rows, cols, r.f64s()?).map_err(|e| Error::Codec(e.to_string()))?;
        let coef = r.f64s()?;
        if coef.len() != rows {
            return Err(Error::Codec("inconsistent RBF SVM payload".into()));
        }
        Ok(RbfSvmModel {
            sigma,
            form,
            support,
            coef,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen;
    use rand::Rng;

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.7), 1.0);
        let sigma: f64 = 1.3;
        // ‖x − y‖² = 2σ²
        let x = [0.0, 0.0];
        let y = [sigma, sigma];
        assert!((rbf_kernel(&x, &y, sigma) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((rbf_kernel(&x, &y, sigma) - 0.3679).abs() < 1e-4);
        let lit = rbf_kernel_with(&x, &y, sigma, KernelForm::Literal).unwrap();
        assert!((lit - (-(2.0f64 * sigma * sigma).sqrt() / (2.0 * sigma * sigma)).exp()).abs() < 1e-15);
        assert!(rbf_kernel_with(&[1.0], &[1.0, 2.0], 1.0, KernelForm::Squared).is_err());
    }

    #[test]
    fn kernel_symmetry_and_gram_psd() {
        let mut rng = crate::seed::rng(12);
        let pts: Vec<Vec<f64>> = (0..25).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut gram = Matrix::zeros(25, 25);
        for i in 0..25 {
            for j in 0..25 {
                let k = rbf_kernel(&pts[i], &pts[j], 1.0);
                assert_eq!(k, rbf_kernel(&pts[j], &pts[i], 1.0));
                assert!(k > 0.0 && k <= 1.0);
                gram.set(i, j, k + if i == j { 1e-6 } else { 0.0 });
            }
        }
        let (vals, _) = symmetric_eigen(&gram);
        assert!(vals.iter().all(|&v| v > -1e-8), "{vals:?}");
    }

    fn line_data() -> (Matrix<f64>, Vec<u8>) {
        (Matrix::from_rows(&[[-2.0], [-1.0], [1.0], [2.0]]).unwrap(), vec![0, 0, 1, 1])
    }

    #[test]
    fn linear_svm_separates_1d_points() {
        let (x, y) = line_data();
        let cfg = LinearSvmConfig {
            reg_c: 1e3,
            epochs: 200,
        };
        let m = LinearSvmModel::train(&x, &y, &cfg, 0).unwrap();
        for (r, &l) in x.iter_rows().zip(&y) {
            assert_eq!(u8::from(m.decision(r) >= 0.0), l);
        }
        assert_eq!(m.hinge_loss(&x, &y), 0.0);
        let neg = LinearSvmModel { w: vec![1.0], b: -4.0 };
        assert!(neg.decision(&[1.0]) < 0.0);
    }

    #[test]
    fn linear_svm_rejects_single_class() {
        let (x, _) = line_data();
        assert!(matches!(
            LinearSvmModel::train(&x, &[1, 1, 1, 1], &LinearSvmConfig::default(), 0),
            Err(Error::DegenerateTrainingSet(_))
        ));
    }

    #[test]
    fn rbf_svm_learns_a_ring() {
        let mut rng = crate::seed::rng(8);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..120 {
            let inner = i % 2 == 0;
            let r = if inner { rng.random_range(0.0..1.0) } else { rng.random_range(2.0..3.0) };
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            rows.push([r * th.cos(), r * th.sin()]);
            labels.push(u8::from(inner));
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let m = RbfSvmModel::train(&x, &labels, &RbfSvmConfig { reg_c: 10.0, ..RbfSvmConfig::default() }, 1).unwrap();
        let correct = x.iter_rows().zip(&labels).filter(|(r, &l)| u8::from(m.decision(r) >= 0.0) == l).count();
        assert!(correct >= 118, "{correct}/120");
        assert!(m.decision(&[0.0, 0.0]) > 0.0);
        assert!(m.decision(&[2.5, 0.0]) < 0.0);
        assert!(m.n_support() > 0);
    }

    #[test]
    fn median_distance_heuristic() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        // distances 1, 3, 2
        assert_eq!(median_pairwise_distance(&x), 2.0);
        assert_eq!(median_pairwise_distance(&Matrix::from_rows(&[[1.0], [1.0]]).unwrap()), 1.0);
    }
}
