//! Principal component analysis without forming the covariance matrix.
//!
//! Feature dimensions reach six figures, so the top directions are found by
//! subspace iteration on the centered data: only products with `X_c` and
//! `X_cᵀ` are needed, each costing `O(n p k)` for a `k`-column block.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{dot, orthonormalize_columns, symmetric_eigen};
use crate::{seed, Error, Matrix, Result};

/// Extra block columns beyond the requested component count.
const OVERSAMPLE: usize = 10;
const MAX_ITERATIONS: usize = 300;
/// Residual `‖C v − λ v‖` relative to the leading eigenvalue.
const RESIDUAL_TOL: f64 = 1e-11;
const INIT_SEED: u64 = 0x5ca1_ab1e;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `q × p`, one orthonormal direction per row.
    components: Matrix<f64>,
    explained_variance: Vec<f64>,
    total_variance: f64,
}

/// `X_c M` for an `n × p` data matrix and a `p × k` block.
fn centered_mul<T: Copy + Into<f64>>(x: &Matrix<T>, mean: &[f64], m: &Matrix<f64>) -> Matrix<f64> {
    let k = m.cols();
    let mut out = Matrix::zeros(x.rows(), k);
    let mut centered = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for ((c, &v), mu) in centered.iter_mut().zip(x.row(i)).zip(mean) {
            *c = v.into() - mu;
        }
        let o = out.row_mut(i);
        for (j, &c) in centered.iter().enumerate() {
            if c != 0.0 {
                for (oo, &mm) in o.iter_mut().zip(m.row(j)) {
                    *oo += c * mm;
                }
            }
        }
    }
    out
}

/// `X_cᵀ W` for an `n × k` block.
fn centered_t_mul<T: Copy + Into<f64>>(x: &Matrix<T>, mean: &[f64], w: &Matrix<f64>) -> Matrix<f64> {
    let mut out = Matrix::zeros(x.cols(), w.cols());
    for i in 0..x.rows() {
        let wi = w.row(i);
        for (j, (&v, mu)) in x.row(i).iter().zip(mean).enumerate() {
            let c = v.into() - mu;
            if c != 0.0 {
                for (oo, &ww) in out.row_mut(j).iter_mut().zip(wi) {
                    *oo += c * ww;
                }
            }
        }
    }
    out
}

/// Orthonormalizes the columns, refilling any column that collapsed (the
/// block spans more directions than the data) with fresh random entries.
fn orthonormal_block(m: &mut Matrix<f64>, rng: &mut impl Rng) {
    for _ in 0..5 {
        orthonormalize_columns(m);
        let dead: Vec<usize> = (0..m.cols())
            .filter(|&j| (0..m.rows()).all(|r| m.get(r, j) == 0.0))
            .collect();
        if dead.is_empty() {
            return;
        }
        for &j in &dead {
            for r in 0..m.rows() {
                m.set(r, j, rng.sample(StandardNormal));
            }
        }
    }
    orthonormalize_columns(m);
}

/// Fits `q` principal directions of the rows of `data`.
///
/// Requires `1 ≤ q ≤ min(n − 1, p)`, finite data and nonzero total variance.
pub fn pca_fit<T: Copy + Into<f64>>(data: &Matrix<T>, q: usize) -> Result<PcaModel> {
    let (n, p) = (data.rows(), data.cols());
    if q == 0 || n < 2 || q > (n - 1).min(p) {
        return Err(Error::validation(format!(
            "PCA with {q} components needs 1 <= q <= min(n - 1, p) = {}",
            (n.max(1) - 1).min(p)
        )));
    }
    if data.as_slice().iter().any(|&v| !v.into().is_finite()) {
        return Err(Error::validation("PCA input contains non-finite values"));
    }
    let mut mean = vec![0.0; p];
    for row in data.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v.into();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let sum_sq: f64 = data
        .iter_rows()
        .map(|r| r.iter().zip(&mean).map(|(&v, m)| (v.into() - m).powi(2)).sum::<f64>())
        .sum();
    let total_variance = sum_sq / (n - 1) as f64;
    if total_variance <= 0.0 {
        return Err(Error::validation("PCA input has zero variance"));
    }

    let k = (q + OVERSAMPLE).min(n).min(p);
    let mut rng = seed::rng(INIT_SEED);
    let mut v = Matrix::zeros(p, k);
    for x in v.as_mut_slice() {
        *x = rng.sample(StandardNormal);
    }
    orthonormal_block(&mut v, &mut rng);

    let mut ritz_vectors;
    let mut ritz_values;
    let mut iteration = 0;
    loop {
        iteration += 1;
        // C V with C = X_cᵀ X_c
        let g = centered_t_mul(data, &mean, &centered_mul(data, &mean, &v));
        let h = v.t_matmul(&g);
        let sym = Matrix::from_vec(k, k, (0..k * k).map(|e| 0.5 * (h.get(e / k, e % k) + h.get(e % k, e / k))).collect())?;
        let (values, u) = symmetric_eigen(&sym);
        ritz_vectors = v.matmul(&u);
        let g_ritz = g.matmul(&u);
        ritz_values = values;
        let scale = ritz_values[0].abs().max(f64::MIN_POSITIVE);
        let residual = (0..q)
            .map(|j| {
                (0..p)
                    .map(|r| (g_ritz.get(r, j) - ritz_values[j] * ritz_vectors.get(r, j)).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    / scale
            })
            .fold(0.0, f64::max);
        if residual < RESIDUAL_TOL || iteration >= MAX_ITERATIONS || k == p {
            break;
        }
        v = g_ritz;
        orthonormal_block(&mut v, &mut rng);
    }

    let mut components = Matrix::zeros(p, q);
    for r in 0..p {
        for j in 0..q {
            components.set(r, j, ritz_vectors.get(r, j));
        }
    }
    orthonormalize_columns(&mut components);
    let mut components = components.transpose();
    for j in 0..q {
        let row = components.row_mut(j);
        let lead = row
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > row[best].abs() { i } else { best });
        if row[lead] < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let explained_variance = ritz_values[..q].iter().map(|&l| l.max(0.0) / (n - 1) as f64).collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        total_variance,
    })
}

impl PcaModel {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `q × p` matrix whose rows are the principal directions.
    pub fn components(&self) -> &Matrix<f64> {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Sample variance (divisor `n − 1`) along each component.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance.iter().map(|v| v / self.total_variance).collect()
    }

    pub fn transform_row<T: Copy + Into<f64>>(&self, row: &[T]) -> Vec<f64> {
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(&v, m)| v.into() - m).collect();
        self.components.iter_rows().map(|c| dot(c, &centered)).collect()
    }

    /// Coordinates `(x − mean) Wᵀ`, one row per input row.
    pub fn transform<T: Copy + Into<f64>>(&self, data: &Matrix<T>) -> Result<Matrix<f64>> {
        if data.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: data.cols(),
            });
        }
        let mut out = Vec::with_capacity(data.rows() * self.n_components());
        for row in data.iter_rows() {
            out.extend(self.transform_row(row));
        }
        Matrix::from_vec(data.rows(), self.n_components(), out)
    }

    /// Maps coordinates back to feature space: `mean + z W`.
    pub fn reconstruct(&self, coords: &Matrix<f64>) -> Result<Matrix<f64>> {
        if coords.cols() != self.n_components() {
            return Err(Error::DimensionMismatch {
                expected: self.n_components(),
                actual: coords.cols(),
            });
        }
        let mut out = coords.matmul(&self.components);
        for i in 0..out.rows() {
            for (x, m) in out.row_mut(i).iter_mut().zip(&self.mean) {
                *x += m;
            }
        }
        Ok(out)
    }
}

pub fn pca_transform<T: Copy + Into<f64>>(model: &PcaModel, data: &Matrix<T>) -> Result<Matrix<f64>> {
    model.transform(data)
}
