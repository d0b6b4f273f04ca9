//! Binary Gaussian process classification with a logistic likelihood and
//! the Laplace approximation.
//!
//! The latent prior has zero mean and an RBF covariance. Newton iterations
//! find the posterior mode `f̂`; predictions average the logistic link over
//! the Gaussian predictive latent with the probit-style correction
//! `σ(μ / sqrt(1 + π·s²/8))`.

use serde::{Deserialize, Serialize};

use super::svm::rbf_kernel;
use crate::codec::{Reader, Writer};
use crate::linalg::{backward_substitute_transposed, cholesky, forward_substitute};
use crate::{Error, Matrix, Result, DEFECT};

/// Largest training set for which the dense `n × n` kernel is built.
pub const MAX_GP_TRAINING_ROWS: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub length_scale: f64,
    pub jitter: f64,
    pub max_newton_iters: usize,
    pub newton_tol: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            length_scale: 1.0,
            jitter: 1e-6,
            max_newton_iters: 100,
            newton_tol: 1e-6,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.length_scale > 0.0
            && self.jitter > 0.0
            && self.max_newton_iters > 0
            && self.newton_tol > 0.0
            && self.length_scale.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::validation("GP length_scale, jitter, max_newton_iters and newton_tol must be positive"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    length_scale: f64,
    train: Matrix<f64>,
    /// `∇ log p(y | f̂)`, the weights of the predictive mean.
    grad_log_lik: Vec<f64>,
    /// `W^½` at the mode.
    sqrt_w: Vec<f64>,
    /// Cholesky factor of `I + W^½ K W^½`.
    chol: Matrix<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log σ(z)` without overflow.
#[inline]
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

struct NewtonState {
    pi: Vec<f64>,
    sqrt_w: Vec<f64>,
    chol: Matrix<f64>,
}

fn newton_state(k: &Matrix<f64>, f: &[f64]) -> Result<NewtonState> {
    let n = f.len();
    let pi: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
    let sqrt_w: Vec<f64> = pi.iter().map(|p| (p * (1.0 - p)).sqrt()).collect();
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = sqrt_w[i] * k.get(i, j) * sqrt_w[j] + if i == j { 1.0 } else { 0.0 };
            b.set(i, j, v);
        }
    }
    let chol = cholesky(&b)?;
    Ok(NewtonState { pi, sqrt_w, chol })
}

/// Finds the Laplace posterior mode for training inputs `x` and 0/1 labels.
pub fn gp_laplace_fit(x: &Matrix<f64>, labels: &[u8], config: &GpConfig) -> Result<GpModel> {
    config.validate()?;
    let n = x.rows();
    if n == 0 || labels.len() != n {
        return Err(Error::validation("GP needs a nonempty labeled training set"));
    }
    if n > MAX_GP_TRAINING_ROWS {
        return Err(Error::TooLarge(format!(
            "GP kernel matrix for {n} rows exceeds the {MAX_GP_TRAINING_ROWS}-row limit"
        )));
    }
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = rbf_kernel(x.row(i), x.row(j), config.length_scale);
            k.set(i, j, v);
            k.set(j, i, v);
        }
        let d = k.get(i, i) + config.jitter;
        k.set(i, i, d);
    }
    // targets in {0, 1}; ∇ log p(y|f) = t − π
    let t: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == DEFECT))).collect();
    let sign: Vec<f64> = t.iter().map(|&v| 2.0 * v - 1.0).collect();

    let mut f = vec![0.0; n];
    let mut objective = f64::NEG_INFINITY;
    let mut grad_norm = f64::INFINITY;
    for _iter in 0..config.max_newton_iters {
        let st = newton_state(&k, &f)?;
        let w: Vec<f64> = st.sqrt_w.iter().map(|s| s * s).collect();
        let b: Vec<f64> = (0..n).map(|i| w[i] * f[i] + (t[i] - st.pi[i])).collect();
        let kb = k.matvec(&b);
        let rhs: Vec<f64> = (0..n).map(|i| st.sqrt_w[i] * kb[i]).collect();
        let tmp = forward_substitute(&st.chol, &rhs);
        let tmp = backward_substitute_transposed(&st.chol, &tmp);
        let a: Vec<f64> = (0..n).map(|i| b[i] - st.sqrt_w[i] * tmp[i]).collect();
        f = k.matvec(&a);

        let new_objective = -0.5 * crate::linalg::dot(&a, &f)
            + f.iter().zip(&sign).map(|(fi, si)| log_sigmoid(si * fi)).sum::<f64>();
        // ∇ψ = ∇ log p(y|f) − K⁻¹ f, and K⁻¹ f = a
        grad_norm = f
            .iter()
            .zip(&t)
            .zip(&a)
            .map(|((fi, ti), ai)| (ti - sigmoid(*fi) - ai).powi(2))
            .sum::<f64>()
            .sqrt();
        if !new_objective.is_finite() {
            break;
        }
        let converged = (new_objective - objective).abs() < config.newton_tol;
        objective = new_objective;
        if converged {
            let st = newton_state(&k, &f)?;
            return Ok(GpModel {
                length_scale: config.length_scale,
                train: x.clone(),
                grad_log_lik: (0..n).map(|i| t[i] - st.pi[i]).collect(),
                sqrt_w: st.sqrt_w,
                chol: st.chol,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: config.max_newton_iters,
        gradient_norm: grad_norm,
    })
}

impl GpModel {
    /// Predictive latent mean and variance at `x`.
    pub fn latent(&self, x: &[f64]) -> (f64, f64) {
        let ks: Vec<f64> = self
            .train
            .iter_rows()
            .map(|r| rbf_kernel(r, x, self.length_scale))
            .collect();
        let mean = crate::linalg::dot(&ks, &self.grad_log_lik);
        let wk: Vec<f64> = ks.iter().zip(&self.sqrt_w).map(|(k, s)| k * s).collect();
        let v = forward_substitute(&self.chol, &wk);
        let var = (1.0 - crate::linalg::dot(&v, &v)).max(0.0);
        (mean, var)
    }

    /// Averaged predictive defect probability, strictly inside (0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let (mean, var) = self.latent(x);
        sigmoid(mean / (1.0 + std::f64::consts::PI * var / 8.0).sqrt())
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.f64(self.length_scale);
        w.usize(self.train.rows());
        w.usize(self.train.cols());
        w.f64s(self.train.as_slice());
        w.f64s(&self.grad_log_lik);
        w.f64s(&self.sqrt_w);
        w.f64s(self.chol.as_slice());
    }

    pub(crate) fn decode(r: &mut Reader) -> Result<Self> {
        let bad = |e: Error| Error::Codec(e.to_string());
        let length_scale = r.f64()?;
        let rows = r.usize()?;
        let cols = r.usize()?;
        let train = Matrix::from_vec(rows, cols, r.f64s()?).map_err(bad)?;
        let grad_log_lik = r.f64s()?;
        let sqrt_w = r.f64s()?;
        let chol = Matrix::from_vec(rows, rows, r.f64s()?).map_err(bad)?;
        if grad_log_lik.len() != rows || sqrt_w.len() != rows {
            return Err(Error::Codec("inconsistent GP payload".into()));
        }
        Ok(GpModel {
            length_scale,
            train,
            grad_log_lik,
            sqrt_w,
            chol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn single_positive_point_pulls_latent_up() {
        let x = Matrix::from_rows(&[[0.3, -1.0]]).unwrap();
        let m = gp_laplace_fit(&x, &[1], &GpConfig::default()).unwrap();
        assert!(m.predict_proba(&[0.3, -1.0]) > 0.5);
    }

    #[test]
    fn separable_1d_data() {
        // 10 points near -2, 10 near +2
        let xs: Vec<[f64; 1]> = (0..20)
            .map(|i| {
                let base = if i < 10 { -2.0 } else { 2.0 };
                [base + (i % 10) as f64 * 0.05 - 0.25]
            })
            .collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let x = Matrix::from_rows(&xs).unwrap();
        let m = gp_laplace_fit(&x, &labels, &GpConfig::default()).unwrap();
        assert!(m.predict_proba(&[-2.0]) < 0.5);
        assert!(m.predict_proba(&[2.0]) > 0.5);
        for (row, &l) in xs.iter().zip(&labels) {
            assert_eq!(u8::from(m.predict_proba(row) >= 0.5), l);
        }
    }

    #[test]
    fn predictive_probability_is_strictly_inside_unit_interval() {
        let mut rng = crate::seed::rng(3);
        let rows: Vec<[f64; 3]> = (0..40)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + 0.5 * r[1] > 0.0)).collect();
        let m = gp_laplace_fit(&Matrix::from_rows(&rows).unwrap(), &labels, &GpConfig::default()).unwrap();
        for _ in 0..200 {
            let probe = [rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)];
            let p = m.predict_proba(&probe);
            assert!(p > 0.0 && p < 1.0, "{p}");
        }
        // far from all data the prior dominates
        assert!((m.predict_proba(&[100.0, 100.0, 100.0]) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_reports_gradient_norm() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let cfg = GpConfig {
            max_newton_iters: 1,
            newton_tol: 1e-300,
            ..GpConfig::default()
        };
        match gp_laplace_fit(&x, &[0, 1, 0], &cfg) {
            Err(Error::NoConvergence { iterations: 1, gradient_norm }) => assert!(gradient_norm.is_finite()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn size_guard() {
        let x = Matrix::zeros(MAX_GP_TRAINING_ROWS + 1, 1);
        let labels = vec![0u8; MAX_GP_TRAINING_ROWS + 1];
        assert!(matches!(gp_laplace_fit(&x, &labels, &GpConfig::default()), Err(Error::TooLarge(_))));
    }
}
