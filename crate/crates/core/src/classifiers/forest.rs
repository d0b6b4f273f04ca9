//! CART decision trees with Gini impurity and a bagged random forest.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::{seed, Error, Matrix, Result, DEFECT};

/// Gini impurity `1 − Σ p_c²` of a node holding the given class counts.
/// An empty node has impurity 0.
pub fn gini_impurity(n_ok: usize, n_defect: usize) -> f64 {
    let n = (n_ok + n_defect) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (n_ok as f64 / n, n_defect as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

/// How many features each node considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    #[default]
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::Count(c) => c,
        };
        m.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 10,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            min_leaf: 1,
            max_depth: None,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_leaf == 0 {
            return Err(Error::validation("random forest needs n_trees > 0 and min_leaf > 0"));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(Error::validation("max_features count must be positive"));
        }
        Ok(())
    }

    fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            max_features: self.max_features,
        }
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.usize(self.n_trees);
        match self.max_features {
            MaxFeatures::All => w.u8(0),
            MaxFeatures::Sqrt => w.u8(1),
            MaxFeatures::Count(c) => {
                w.u8(2);
                w.usize(c);
            }
        }
        w.u8(u8::from(self.bootstrap));
        w.usize(self.min_leaf);
        match self.max_depth {
            None => w.u8(0),
            Some(d) => {
                w.u8(1);
                w.usize(d);
            }
        }
    }

    pub(crate) fn decode(r: &mut Reader) -> Result<Self> {
        let n_trees = r.usize()?;
        let max_features = match r.u8()? {
            0 => MaxFeatures::All,
            1 => MaxFeatures::Sqrt,
            2 => MaxFeatures::Count(r.usize()?),
            c => return Err(Error::Codec(format!("unknown max_features code {c}"))),
        };
        let bootstrap = r.u8()? != 0;
        let min_leaf = r.usize()?;
        let max_depth = match r.u8()? {
            0 => None,
            _ => Some(r.usize()?),
        };
        Ok(ForestConfig {
            n_trees,
            max_features,
            bootstrap,
            min_leaf,
            max_depth,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(u8),
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl DecisionTree {
    /// Fits a tree on every row once, in order.
    pub fn fit(x: &Matrix<f64>, y: &[u8], config: &TreeConfig, seed_v: u64) -> Result<Self> {
        let samples: Vec<usize> = (0..x.rows()).collect();
        Self::fit_samples(x, y, samples, config, &mut seed::rng(seed_v))
    }

    fn fit_samples(x: &Matrix<f64>, y: &[u8], samples: Vec<usize>, config: &TreeConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        if samples.is_empty() || y.len() != x.rows() {
            return Err(Error::validation("decision tree needs a nonempty labeled training set"));
        }
        let d = x.cols();
        let m = config.max_features.resolve(d);
        let mut nodes = vec![Node::Leaf(DEFECT)];
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, samples, 0usize)];
        let mut features: Vec<usize> = (0..d).collect();
        while let Some((slot, idx, depth)) = stack.pop() {
            let n_def = idx.iter().filter(|&&i| y[i] == DEFECT).count();
            let n_ok = idx.len() - n_def;
            nodes[slot] = Node::Leaf(u8::from(n_def >= n_ok));
            let depth_left = config.max_depth.is_none_or(|md| depth < md);
            if n_def == 0 || n_ok == 0 || !depth_left || idx.len() < 2 * config.min_leaf {
                continue;
            }
            let Some(best) = best_split(x, y, &idx, &mut features, m, config.min_leaf, rng) else {
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.get(i, best.feature) <= best.threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf(DEFECT));
            nodes.push(Node::Leaf(DEFECT));
            nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right: left + 1,
            };
            stack.push((left + 1, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        Ok(DecisionTree { nodes })
    }

    pub fn predict_row(&self, x: &[f64]) -> u8 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(label) => return label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    fn encode(&self, w: &mut Writer) {
        w.usize(self.nodes.len());
        for node in &self.nodes {
            match *node {
                Node::Leaf(label) => {
                    w.u8(0);
                    w.u8(label);
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    w.u8(1);
                    w.usize(feature);
                    w.f64(threshold);
                    w.usize(left);
                    w.usize(right);
                }
            }
        }
    }

    fn decode(r: &mut Reader, dim: usize) -> Result<Self> {
        let n = r.usize()?;
        let mut nodes = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            nodes.push(match r.u8()? {
                0 => Node::Leaf(r.u8()?),
                1 => Node::Split {
                    feature: r.usize()?,
                    threshold: r.f64()?,
                    left: r.usize()?,
                    right: r.usize()?,
                },
                c => return Err(Error::Codec(format!("unknown tree node tag {c}"))),
            });
        }
        // children must point forward so prediction always terminates
        let ok = !nodes.is_empty()
            && nodes.iter().enumerate().all(|(i, node)| match *node {
                Node::Leaf(_) => true,
                Node::Split { feature, left, right, .. } => feature < dim && left > i && right > i && left < n && right < n,
            });
        if !ok {
            return Err(Error::Codec("malformed decision tree".into()));
        }
        Ok(DecisionTree { nodes })
    }
}

/// Searches `m` randomly drawn features (examined in ascending order), then
/// keeps drawing one at a time while no usable split has been found.
fn best_split(
    x: &Matrix<f64>,
    y: &[u8],
    idx: &[usize],
    features: &mut [usize],
    m: usize,
    min_leaf: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let d = features.len();
    let (drawn, _) = features.partial_shuffle(rng, d);
    let mut first: Vec<usize> = drawn[..m].to_vec();
    first.sort_unstable();
    let mut best: Option<Candidate> = None;
    let mut column: Vec<(f64, u8)> = Vec::with_capacity(idx.len());
    let mut consider = |f: usize, best: &mut Option<Candidate>| {
        column.clear();
        column.extend(idx.iter().map(|&i| (x.get(i, f), y[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = column.len();
        let total_def = column.iter().filter(|c| c.1 == DEFECT).count();
        let mut left_def = 0;
        for k in 1..n {
            left_def += usize::from(column[k - 1].1 == DEFECT);
            if column[k - 1].0 == column[k].0 || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let (nl, nr) = (k, n - k);
            let imp = (nl as f64 * gini_impurity(nl - left_def, left_def)
                + nr as f64 * gini_impurity(nr - (total_def - left_def), total_def - left_def))
                / n as f64;
            if best.as_ref().is_none_or(|b| imp < b.impurity) {
                let threshold = column[k - 1].0 + (column[k].0 - column[k - 1].0) / 2.0;
                *best = Some(Candidate { impurity: imp, feature: f, threshold });
            }
        }
    };
    for &f in &first {
        consider(f, &mut best);
    }
    let mut extra = m;
    while best.is_none() && extra < d {
        consider(drawn[extra], &mut best);
        extra += 1;
    }
    best
}

/// Bagged ensemble of decision trees; the score is the fraction of trees
/// voting defect.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    trees: Vec<DecisionTree>,
}

impl RandomForestModel {
    pub fn fit(x: &Matrix<f32>, y: &[u8], config: &ForestConfig, seed_v: u64) -> Result<Self> {
        config.validate()?;
        let n = x.rows();
        if n == 0 || y.len() != n {
            return Err(Error::validation("random forest needs a nonempty labeled training set"));
        }
        let x = x.to_f64();
        let tree_cfg = config.tree_config();
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(seed_v, t as u64));
                let samples: Vec<usize> = if config.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit_samples(&x, y, samples, &tree_cfg, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RandomForestModel { trees })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn score_row(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict_row(x) == DEFECT).count();
        votes as f64 / self.trees.len() as f64
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.usize(self.trees.len());
        for t in &self.trees {
            t.encode(w);
        }
    }

    pub(crate) fn decode(r: &mut Reader, dim: usize) -> Result<Self> {
        let n = r.usize()?;
        if n == 0 {
            return Err(Error::Codec("random forest without trees".into()));
        }
        let trees = (0..n).map(|_| DecisionTree::decode(r, dim)).collect::<Result<Vec<_>>>()?;
        Ok(RandomForestModel { trees })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(5, 0), 0.0);
        assert_eq!(gini_impurity(2, 2), 0.5);
        assert!((gini_impurity(1, 2) - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(gini_impurity(0, 0), 0.0);
    }

    fn xor() -> (Matrix<f64>, Vec<u8>) {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        (x, vec![0, 1, 1, 0])
    }

    #[test]
    fn unlimited_tree_fits_training_data() {
        let (x, y) = xor();
        let t = DecisionTree::fit(&x, &y, &TreeConfig::default(), 3).unwrap();
        for (r, &l) in x.iter_rows().zip(&y) {
            assert_eq!(t.predict_row(r), l);
        }
        assert_eq!(t.depth(), 2);
        let stump = DecisionTree::fit(&x, &y, &TreeConfig { max_depth: Some(0), ..TreeConfig::default() }, 3).unwrap();
        assert_eq!(stump.n_nodes(), 1);
        // tie at the root goes to defect
        assert_eq!(stump.predict_row(&[0.0, 0.0]), DEFECT);
    }

    #[test]
    fn thresholds_are_midpoints() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [4.0], [8.0]]).unwrap();
        let t = DecisionTree::fit(&x, &[0, 0, 1, 1], &TreeConfig::default(), 0).unwrap();
        assert!(matches!(t.nodes[0], Node::Split { threshold, .. } if threshold == 3.0));
    }

    #[test]
    fn constant_features_make_a_leaf() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        let t = DecisionTree::fit(&x, &[0, 1, 0], &TreeConfig::default(), 0).unwrap();
        assert_eq!(t.n_nodes(), 1);
        assert_eq!(t.predict_row(&[0.0, 0.0]), 0);
    }

    #[test]
    fn single_full_tree_forest_matches_plain_tree() {
        let mut rng = seed::rng(5);
        let rows: Vec<[f32; 3]> = (0..60).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + r[1] * r[2] > 0.6)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = ForestConfig {
            n_trees: 1,
            max_features: MaxFeatures::All,
            bootstrap: false,
            ..ForestConfig::default()
        };
        let forest = RandomForestModel::fit(&x, &y, &cfg, 11).unwrap();
        let tree = DecisionTree::fit(&x.to_f64(), &y, &TreeConfig::default(), 99).unwrap();
        assert_eq!(forest.trees()[0], tree);
        for r in x.to_f64().iter_rows() {
            assert_eq!(forest.score_row(r), f64::from(tree.predict_row(r)));
        }
    }

    #[test]
    fn forest_roundtrip_and_single_class() {
        let x = Matrix::from_rows(&[[0.0f32], [1.0], [2.0]]).unwrap();
        let f = RandomForestModel::fit(&x, &[1, 1, 1], &ForestConfig::default(), 0).unwrap();
        assert_eq!(f.score_row(&[5.0]), 1.0);
        let mut w = Writer::new();
        f.encode(&mut w);
        let bytes = w.finish();
        let mut r = Reader::new(&bytes);
        assert_eq!(RandomForestModel::decode(&mut r, 1).unwrap(), f);
    }
}
