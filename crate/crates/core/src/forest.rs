//! CART classification trees and bagged random forests.
//!
//! Split quality is the weighted Gini impurity, compared exactly as a
//! rational number so that equal-impurity candidates tie deterministically:
//! the lowest feature index wins, then the lowest threshold. An impure node
//! stays a leaf when it hits the depth limit, or when no split lowers its
//! impurity and only one level of depth remains.

use std::cmp::Ordering;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{Label, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("not enough training rows: {0}")]
    TooFewRows(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("non-finite input")]
    NonFiniteInput,
}

/// Weighted Gini impurity times the node size, held as `num / den`.
#[derive(Debug, Clone, Copy)]
pub struct Impurity {
    num: u128,
    den: u128,
}

impl Impurity {
    /// `n * gini` of a node with the given class counts.
    pub fn node(counts: [usize; 2]) -> Self {
        let (h, p) = (counts[0] as u128, counts[1] as u128);
        let n = h + p;
        Self { num: n * n - h * h - p * p, den: n.max(1) }
    }

    /// `n_left * gini_left + n_right * gini_right`.
    pub fn split(left: [usize; 2], right: [usize; 2]) -> Self {
        let l = Self::node(left);
        let r = Self::node(right);
        Self { num: l.num * r.den + r.num * l.den, den: l.den * r.den }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Impurity {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Impurity {}

impl PartialOrd for Impurity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Impurity {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// `[n_HC, n_PD]` of the training rows that reached the leaf.
    Leaf { counts: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub max_depth: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub feature_subsample: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub impurity: Impurity,
}

/// Best Gini split of `samples` (row indices, repeats allowed) over the given
/// features, which must be in ascending order. Candidate thresholds are the
/// midpoints between consecutive distinct values.
pub fn best_split(x: &Matrix, y: &[Label], samples: &[usize], features: &[usize]) -> Option<SplitChoice> {
    let mut total = [0usize; 2];
    for &i in samples {
        total[y[i].index()] += 1;
    }
    let mut best: Option<SplitChoice> = None;
    let mut order: Vec<usize> = samples.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        let mut left = [0usize; 2];
        for k in 0..order.len().saturating_sub(1) {
            left[y[order[k]].index()] += 1;
            let (lo, hi) = (x.get(order[k], f), x.get(order[k + 1], f));
            if lo == hi {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let impurity = Impurity::split(left, right);
            if best.is_none_or(|b| impurity < b.impurity) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(SplitChoice { feature: f, threshold, impurity });
            }
        }
    }
    best
}

fn check_xy(x: &Matrix, y: &[Label]) -> Result<(), ForestError> {
    if y.len() != x.rows() {
        return Err(ForestError::DimensionMismatch { expected: x.rows(), got: y.len() });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(ForestError::NonFiniteInput);
    }
    Ok(())
}

/// Fits a tree on every row of `x`.
pub fn fit_tree<R: Rng>(x: &Matrix, y: &[Label], params: &TreeParams, rng: &mut R) -> Result<DecisionTree, ForestError> {
    let samples: Vec<usize> = (0..x.rows()).collect();
    fit_tree_on(x, y, &samples, params, rng)
}

/// Fits a tree on the rows listed in `samples` (a bootstrap draw may repeat rows).
pub fn fit_tree_on<R: Rng>(
    x: &Matrix,
    y: &[Label],
    samples: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Result<DecisionTree, ForestError> {
    check_xy(x, y)?;
    if samples.is_empty() {
        return Err(ForestError::TooFewRows(0));
    }
    if params.feature_subsample == 0 {
        return Err(ForestError::InvalidParams("feature_subsample must be at least 1".into()));
    }
    let mut tree = DecisionTree { nodes: Vec::new(), max_depth: params.max_depth, n_features: x.cols() };
    grow(&mut tree, x, y, samples.to_vec(), 0, params, rng);
    Ok(tree)
}

fn grow<R: Rng>(
    tree: &mut DecisionTree,
    x: &Matrix,
    y: &[Label],
    samples: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    rng: &mut R,
) -> usize {
    let mut counts = [0usize; 2];
    for &i in &samples {
        counts[y[i].index()] += 1;
    }
    let id = tree.nodes.len();
    tree.nodes.push(Node::Leaf { counts });
    if depth >= params.max_depth || counts[0] == 0 || counts[1] == 0 || x.cols() == 0 {
        return id;
    }
    let n = x.cols();
    let features: Vec<usize> = if params.feature_subsample >= n {
        (0..n).collect()
    } else {
        let mut f = rand::seq::index::sample(rng, n, params.feature_subsample).into_vec();
        f.sort_unstable();
        f
    };
    let Some(split) = best_split(x, y, &samples, &features) else {
        return id;
    };
    // A split that does not lower impurity is only worth taking when its
    // children can still be split again (XOR-like nodes).
    if split.impurity >= Impurity::node(counts) && params.max_depth - depth < 2 {
        return id;
    }
    let (left, right): (Vec<usize>, Vec<usize>) =
        samples.into_iter().partition(|&i| x.get(i, split.feature) <= split.threshold);
    let l = grow(tree, x, y, left, depth + 1, params, rng);
    let r = grow(tree, x, y, right, depth + 1, params, rng);
    tree.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left: l, right: r };
    id
}

impl DecisionTree {
    pub fn leaf_counts(&self, x: &[f64]) -> Result<[usize; 2], ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { counts } => return Ok(*counts),
                Node::Split { feature, threshold, left, right } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Leaf majority; a tied leaf votes HC.
    pub fn predict(&self, x: &[f64]) -> Result<Label, ForestError> {
        let c = self.leaf_counts(x)?;
        Ok(if c[1] > c[0] { Label::Pd } else { Label::Hc })
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means `ceil(sqrt(n_features))`.
    pub feature_subsample: Option<usize>,
    /// Train each tree on a bootstrap resample (otherwise on all rows).
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn new(n_estimators: usize, max_depth: usize) -> Self {
        Self { n_estimators, max_depth, feature_subsample: None, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub feature_subsample: usize,
}

pub fn default_feature_subsample(n_features: usize) -> usize {
    ((n_features as f64).sqrt().ceil() as usize).max(1)
}

/// Generator for tree `index`: one ChaCha stream per tree, so trees can be
/// trained in any order.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn fit_one(x: &Matrix, y: &[Label], params: &ForestParams, tree: &TreeParams, seed: u64, index: usize) -> Result<DecisionTree, ForestError> {
    let mut rng = tree_rng(seed, index);
    let s = x.rows();
    let samples: Vec<usize> = if params.bootstrap {
        (0..s).map(|_| rng.random_range(0..s)).collect()
    } else {
        (0..s).collect()
    };
    fit_tree_on(x, y, &samples, tree, &mut rng)
}

fn forest_setup(x: &Matrix, y: &[Label], params: &ForestParams) -> Result<TreeParams, ForestError> {
    check_xy(x, y)?;
    if x.rows() < 2 {
        return Err(ForestError::TooFewRows(x.rows()));
    }
    if params.n_estimators == 0 {
        return Err(ForestError::InvalidParams("n_estimators must be at least 1".into()));
    }
    Ok(TreeParams {
        max_depth: params.max_depth,
        feature_subsample: params.feature_subsample.unwrap_or_else(|| default_feature_subsample(x.cols())),
    })
}

pub fn fit_forest(x: &Matrix, y: &[Label], params: &ForestParams, seed: u64) -> Result<ForestModel, ForestError> {
    let tree = forest_setup(x, y, params)?;
    let trees = (0..params.n_estimators)
        .map(|i| fit_one(x, y, params, &tree, seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForestModel { trees, n_estimators: params.n_estimators, max_depth: params.max_depth, seed, feature_subsample: tree.feature_subsample })
}

/// Same result as [`fit_forest`], with trees trained on the rayon pool.
pub fn fit_forest_parallel(x: &Matrix, y: &[Label], params: &ForestParams, seed: u64) -> Result<ForestModel, ForestError> {
    let tree = forest_setup(x, y, params)?;
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|i| fit_one(x, y, params, &tree, seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForestModel { trees, n_estimators: params.n_estimators, max_depth: params.max_depth, seed, feature_subsample: tree.feature_subsample })
}

impl ForestModel {
    pub fn pd_votes(&self, x: &[f64]) -> Result<usize, ForestError> {
        let mut votes = 0;
        for t in &self.trees {
            if t.predict(x)? == Label::Pd {
                votes += 1;
            }
        }
        Ok(votes)
    }

    /// Fraction of trees voting PD.
    pub fn predict_vote_fraction(&self, x: &[f64]) -> Result<f64, ForestError> {
        Ok(self.pd_votes(x)? as f64 / self.trees.len() as f64)
    }

    /// Strict majority votes PD; a tie goes to HC.
    pub fn predict(&self, x: &[f64]) -> Result<Label, ForestError> {
        Ok(if 2 * self.pd_votes(x)? > self.trees.len() { Label::Pd } else { Label::Hc })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Hc, Pd};

    fn all(n: usize) -> TreeParams {
        TreeParams { max_depth: 10, feature_subsample: n }
    }

    #[test]
    fn single_feature_split_at_midpoint() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = [Hc, Hc, Pd, Pd];
        let t = fit_tree(&x, &y, &TreeParams { max_depth: 1, feature_subsample: 1 }, &mut tree_rng(0, 0)).unwrap();
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => assert_eq!((*feature, *threshold), (0, 1.5)),
            other => panic!("expected split, got {other:?}"),
        }
        for (r, l) in x.iter_rows().zip(y) {
            assert_eq!(t.predict(r).unwrap(), l);
        }
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let x = Matrix::from_rows(&[vec![0.0], vec![5.0]]).unwrap();
        let t = fit_tree(&x, &[Pd, Pd], &all(1), &mut tree_rng(0, 0)).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { counts: [0, 2] }]);
    }

    #[test]
    fn xor_at_depth_one_refuses_zero_gain_split() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let y = [Hc, Hc, Pd, Pd];
        let t = fit_tree(&x, &y, &TreeParams { max_depth: 1, feature_subsample: 2 }, &mut tree_rng(0, 0)).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { counts: [2, 2] }]);
        assert_eq!(t.predict(&[0.0, 0.0]).unwrap(), Hc);
    }

    #[test]
    fn depth_limit_respected() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64, ((i * 29) % 64) as f64]).collect();
        let y: Vec<Label> = (0..64).map(|i| if (i * 11) % 3 == 0 { Pd } else { Hc }).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        for d in 0..6 {
            let t = fit_tree(&x, &y, &TreeParams { max_depth: d, feature_subsample: 2 }, &mut tree_rng(1, 0)).unwrap();
            assert!(t.depth() <= d);
        }
        let full = fit_tree(&x, &y, &TreeParams { max_depth: 64, feature_subsample: 2 }, &mut tree_rng(1, 0)).unwrap();
        for (r, l) in x.iter_rows().zip(&y) {
            assert_eq!(full.predict(r).unwrap(), *l);
        }
    }

    #[test]
    fn impurity_ordering_is_exact() {
        // 2/3 * 1/2 vs 1/3: equal as rationals
        let a = Impurity { num: 2, den: 6 };
        let b = Impurity { num: 1, den: 3 };
        assert_eq!(a, b);
        assert_eq!(Impurity::node([2, 2]).value(), 2.0);
        assert_eq!(Impurity::split([2, 0], [0, 2]).value(), 0.0);
    }

    #[test]
    fn forest_votes_and_ties() {
        let leaf = |pd: bool| DecisionTree {
            nodes: vec![Node::Leaf { counts: if pd { [0, 1] } else { [1, 0] } }],
            max_depth: 0,
            n_features: 1,
        };
        let f = ForestModel { trees: vec![leaf(true), leaf(true), leaf(false)], n_estimators: 3, max_depth: 0, seed: 0, feature_subsample: 1 };
        assert_eq!(f.predict(&[0.0]).unwrap(), Pd);
        assert_eq!(f.predict_vote_fraction(&[0.0]).unwrap(), 2.0 / 3.0);
        let f = ForestModel { trees: vec![leaf(true), leaf(false)], n_estimators: 2, max_depth: 0, seed: 0, feature_subsample: 1 };
        assert_eq!(f.predict(&[0.0]).unwrap(), Hc);
        assert_eq!(f.predict_vote_fraction(&[0.0]).unwrap(), 0.5);
        assert_eq!(f.predict(&[0.0, 1.0]), Err(ForestError::DimensionMismatch { expected: 1, got: 2 }));
        let tied = DecisionTree { nodes: vec![Node::Leaf { counts: [3, 3] }], max_depth: 0, n_features: 1 };
        assert_eq!(tied.predict(&[0.0]).unwrap(), Hc);
    }

    #[test]
    fn forest_is_deterministic_and_parallel_matches_serial() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64, (i % 5) as f64, (i % 3) as f64, i as f64]).collect();
        let y: Vec<Label> = (0..40).map(|i| if i % 7 + i % 5 > 5 { Pd } else { Hc }).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = ForestParams::new(9, 4);
        let a = fit_forest(&x, &y, &p, 11).unwrap();
        let b = fit_forest(&x, &y, &p, 11).unwrap();
        let c = fit_forest_parallel(&x, &y, &p, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.feature_subsample, 2);
        assert_ne!(a, fit_forest(&x, &y, &p, 12).unwrap());
    }

    #[test]
    fn ensemble_of_one_equals_its_tree() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 4) as f64, ((i * 7) % 9) as f64]).collect();
        let y: Vec<Label> = (0..30).map(|i| if (i * 7) % 9 > 4 { Pd } else { Hc }).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let f = fit_forest(&x, &y, &ForestParams::new(1, 5), 3).unwrap();
        for r in x.iter_rows() {
            assert_eq!(f.predict(r).unwrap(), f.trees[0].predict(r).unwrap());
        }
    }

    #[test]
    fn forest_rejects_tiny_input() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(fit_forest(&x, &[Pd], &ForestParams::new(3, 2), 0), Err(ForestError::TooFewRows(1)));
    }
}
