//! Bagged Gini decision trees on spectral columns.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().round() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 500, max_depth: None, min_samples_leaf: 2, max_features: MaxFeatures::Sqrt, bootstrap: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Fraction of positive training samples reaching the leaf.
    Leaf { positive: f64, n: usize },
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { positive, .. } => return positive,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Mean positive-leaf fraction over trees for each row of `x` (n x d).
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::Shape(format!("forest expects {} features, got {}", self.n_features, x.ncols())));
        }
        Ok((0..x.nrows())
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                self.trees.iter().map(|t| t.predict(&row)).sum::<f64>() / self.trees.len() as f64
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [u8],
    cfg: &'a ForestConfig,
    k: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn grow(&mut self, samples: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = samples.len();
        let pos = samples.iter().filter(|&&i| self.y[i] == 1).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { positive: pos as f64 / n as f64, n });
        let depth_ok = self.cfg.max_depth.is_none_or(|m| depth < m);
        if pos == 0 || pos == n || n < 2 * self.cfg.min_samples_leaf || !depth_ok {
            return id;
        }
        let d = self.x.ncols();
        let mut features: Vec<usize> =
            if self.k == d { (0..d).collect() } else { sample(rng, d, self.k).into_vec() };
        features.sort_unstable();
        let Some(best) = self.best_split(samples, &features, pos) else {
            return id;
        };
        let mid = partition(samples, |i| self.x[(i, best.feature)] <= best.threshold);
        let (l, r) = samples.split_at_mut(mid);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    /// Lowest weighted child impurity; ties keep the earlier feature and
    /// the lower threshold.
    fn best_split(&self, samples: &[usize], features: &[usize], pos: usize) -> Option<BestSplit> {
        let n = samples.len();
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        let parent = gini(pos, n);
        let mut best: Option<BestSplit> = None;
        let mut vals: Vec<(f64, u8)> = Vec::with_capacity(n);
        for &f in features {
            vals.clear();
            vals.extend(samples.iter().map(|&i| (self.x[(i, f)], self.y[i])));
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for s in 1..n {
                left_pos += usize::from(vals[s - 1].1);
                if vals[s].0 == vals[s - 1].0 || s < min_leaf || n - s < min_leaf {
                    continue;
                }
                let impurity = (s as f64 * gini(left_pos, s) + (n - s) as f64 * gini(pos - left_pos, n - s)) / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(BestSplit { impurity, feature: f, threshold: midpoint(vals[s - 1].0, vals[s].0) });
                }
            }
        }
        best.filter(|b| b.impurity < parent)
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // Rounding can land on `b`, which would send it left.
    if m < b {
        m
    } else {
        a
    }
}

/// Stable in-place partition; returns the number of elements satisfying `pred`.
fn partition(v: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = v.iter().partition(|&&i| pred(i));
    let mid = yes.len();
    for (slot, i) in v.iter_mut().zip(yes.into_iter().chain(no)) {
        *slot = i;
    }
    mid
}

/// Fits a forest on rows of `x` (n x d) with 0/1 labels. Each tree draws
/// its bootstrap from a generator seeded by (seed, tree index), so results
/// do not depend on thread scheduling.
pub fn train_forest(x: &DMatrix<f64>, labels: &[u8], cfg: &ForestConfig) -> Result<ForestModel> {
    if x.nrows() != labels.len() {
        return Err(Error::Shape(format!("{} rows vs {} labels", x.nrows(), labels.len())));
    }
    if cfg.n_trees == 0 || x.ncols() == 0 {
        return Err(Error::Config("forest needs at least one tree and one feature".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Training("forest training set contains a single class".into()));
    }
    let k = cfg.max_features.resolve(x.ncols());
    let n = x.nrows();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            let mut samples: Vec<usize> =
                if cfg.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            let mut g = Grower { x, y: labels, cfg, k, nodes: Vec::new() };
            g.grow(&mut samples, 0, &mut rng);
            Tree { nodes: g.nodes }
        })
        .collect();
    Ok(ForestModel { config: *cfg, n_features: x.ncols(), trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> (DMatrix<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 4, |_, _| rng.random::<f64>());
        let y = (0..n).map(|i| u8::from(x[(i, 2)] > 0.5)).collect();
        (x, y)
    }

    #[test]
    fn threshold_separable_feature_is_learned() {
        let (x, y) = toy(120, 1);
        let cfg = ForestConfig { n_trees: 25, ..Default::default() };
        let f = train_forest(&x.rows(0, 80).into_owned(), &y[..80], &cfg).unwrap();
        let p = f.predict_proba(&x.rows(80, 40).into_owned()).unwrap();
        let acc = p.iter().zip(&y[80..]).filter(|(p, &y)| (**p >= 0.5) == (y == 1)).count();
        assert!(acc >= 38, "{acc}/40");
    }

    #[test]
    fn single_class_is_an_error() {
        let x = DMatrix::from_element(4, 2, 1.0);
        assert!(matches!(train_forest(&x, &[1, 1, 1, 1], &ForestConfig::default()), Err(Error::Training(_))));
    }

    #[test]
    fn seeded_forests_are_identical_and_round_trip() {
        let (x, y) = toy(60, 2);
        let cfg = ForestConfig { n_trees: 10, seed: 9, ..Default::default() };
        let a = train_forest(&x, &y, &cfg).unwrap();
        assert_eq!(a, train_forest(&x, &y, &cfg).unwrap());
        assert_eq!(ForestModel::from_json(&a.to_json().unwrap()).unwrap(), a);
    }

    #[test]
    fn depth_limit_and_leaf_size_hold() {
        let (x, y) = toy(200, 3);
        let cfg = ForestConfig { n_trees: 5, max_depth: Some(3), min_samples_leaf: 5, ..Default::default() };
        for t in &train_forest(&x, &y, &cfg).unwrap().trees {
            assert!(t.depth() <= 3);
            assert!(t.nodes.iter().all(|n| !matches!(n, Node::Leaf { n, .. } if *n < 5)));
        }
    }
}
