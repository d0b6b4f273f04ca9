//! Discrete AdaBoost over decision stumps.

use crate::codec::{Reader, Writer};
use crate::{Error, Matrix, Result, DEFECT};

/// `α` used when a stump makes (almost) no weighted error.
const MAX_ALPHA_ERROR: f64 = 1e-12;

/// Single-feature threshold rule: `polarity` when `x[feature] > threshold`,
/// `−polarity` otherwise. A threshold of `−∞` gives a constant rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: f64,
}

impl Stump {
    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        if x[self.feature] > self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }
}

/// Training rows with each feature's row order presorted, so a round costs
/// one linear sweep per feature.
#[derive(Debug, Clone)]
pub struct StumpPool {
    x: Matrix<f64>,
    y: Vec<f64>,
    order: Vec<Vec<usize>>,
}

impl StumpPool {
    pub fn new(x: Matrix<f64>, labels: &[u8]) -> Result<Self> {
        if x.rows() == 0 || labels.len() != x.rows() {
            return Err(Error::validation("AdaBoost needs a nonempty labeled training set"));
        }
        let order = (0..x.cols())
            .map(|f| {
                let mut idx: Vec<usize> = (0..x.rows()).collect();
                idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
                idx
            })
            .collect();
        let y = labels.iter().map(|&l| if l == DEFECT { 1.0 } else { -1.0 }).collect();
        Ok(StumpPool { x, y, order })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn rows(&self) -> &Matrix<f64> {
        &self.x
    }

    /// Stump with the smallest weighted error under normalized `weights`.
    /// Ties keep the earliest candidate (feature order, then threshold).
    pub fn best_stump(&self, weights: &[f64]) -> (Stump, f64) {
        let total: f64 = weights.iter().sum();
        // weight of positives that a constant +1 rule gets wrong is zero, so
        // error(+1, −∞) is the negative mass
        let neg_mass: f64 = weights.iter().zip(&self.y).filter(|(_, &y)| y < 0.0).map(|(w, _)| w).sum();
        let mut best = pick(
            Stump {
                feature: 0,
                threshold: f64::NEG_INFINITY,
                polarity: 1.0,
            },
            neg_mass,
            total,
        );
        for (f, idx) in self.order.iter().enumerate() {
            // err_plus: rows at or below the threshold are called −1
            let mut err_plus = neg_mass;
            for k in 0..idx.len() {
                let i = idx[k];
                err_plus += weights[i] * self.y[i];
                let v = self.x.get(i, f);
                let Some(&next) = idx.get(k + 1) else { break };
                let nv = self.x.get(next, f);
                if v == nv {
                    continue;
                }
                let cand = pick(
                    Stump {
                        feature: f,
                        threshold: v + (nv - v) / 2.0,
                        polarity: 1.0,
                    },
                    err_plus,
                    total,
                );
                if cand.1 < best.1 {
                    best = cand;
                }
            }
        }
        best
    }
}

fn pick(stump: Stump, err_plus: f64, total: f64) -> (Stump, f64) {
    let err_plus = err_plus.clamp(0.0, total);
    let err_minus = total - err_plus;
    if err_minus < err_plus {
        (Stump { polarity: -1.0, ..stump }, err_minus)
    } else {
        (stump, err_plus)
    }
}

/// Result of one boosting round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoundOutcome {
    Added { stump: Stump, error: f64, alpha: f64 },
    /// The best stump was no better than chance; weights are untouched.
    Stopped { error: f64 },
}

/// Stump weight `½ ln((1 − ε)/ε)`, capped for near-zero error.
pub fn stump_alpha(error: f64) -> f64 {
    let e = error.max(MAX_ALPHA_ERROR);
    0.5 * ((1.0 - e) / e).ln()
}

/// Runs one round: fits the best stump and reweights in place.
pub fn adaboost_round(pool: &StumpPool, weights: &mut [f64]) -> RoundOutcome {
    let (stump, error) = pool.best_stump(weights);
    if error >= 0.5 {
        return RoundOutcome::Stopped { error };
    }
    let alpha = stump_alpha(error);
    let (up, down) = (alpha.exp(), (-alpha).exp());
    for (i, w) in weights.iter_mut().enumerate() {
        let correct = stump.predict(pool.x.row(i)) == pool.y[i];
        *w *= if correct { down } else { up };
    }
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    RoundOutcome::Added { stump, error, alpha }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostModel {
    stumps: Vec<(Stump, f64)>,
}

impl AdaBoostModel {
    pub fn fit(x: &Matrix<f32>, y: &[u8], n_rounds: usize) -> Result<Self> {
        let pool = StumpPool::new(x.to_f64(), y)?;
        let n = pool.len();
        let mut weights = vec![1.0 / n as f64; n];
        let mut stumps = Vec::with_capacity(n_rounds);
        for _ in 0..n_rounds {
            match adaboost_round(&pool, &mut weights) {
                RoundOutcome::Added { stump, alpha, .. } => stumps.push((stump, alpha)),
                RoundOutcome::Stopped { .. } => break,
            }
        }
        Ok(AdaBoostModel { stumps })
    }

    /// Weighted stump vote `Σ α h(x)`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.stumps.iter().map(|(s, a)| a * s.predict(x)).sum()
    }

    pub fn n_stumps(&self) -> usize {
        self.stumps.len()
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.usize(self.stumps.len());
        for (s, a) in &self.stumps {
            w.usize(s.feature);
            w.f64(s.threshold);
            w.f64(s.polarity);
            w.f64(*a);
        }
    }

    pub(crate) fn decode(r: &mut Reader) -> Result<Self> {
        let n = r.usize()?;
        let mut stumps = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let stump = Stump {
                feature: r.usize()?,
                threshold: r.f64()?,
                polarity: r.f64()?,
            };
            stumps.push((stump, r.f64()?));
        }
        Ok(AdaBoostModel { stumps })
    }
}
