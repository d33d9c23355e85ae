//! Greedy axis-aligned decision trees and their positive-leaf boxes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{AxisBox, BoxUnion};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// A binary classification tree. Internal nodes send `x[feature] > threshold` right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
    Leaf { label: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 6, min_leaf: 1 }
    }
}

impl TreeNode {
    pub fn leaf(label: u8) -> Self {
        TreeNode::Leaf { label }
    }

    pub fn split(feature: usize, threshold: f64, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Split { feature, threshold, left: Box::new(left), right: Box::new(right) }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Largest feature index referenced, if any.
    pub fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split { feature, left, right, .. } => {
                Some((*feature).max(left.max_feature().unwrap_or(0)).max(right.max_feature().unwrap_or(0)))
            }
        }
    }

    /// Walks root to leaf. Panics if `x` is shorter than a referenced feature.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] > *threshold { right } else { left };
                }
            }
        }
    }

    /// Positive leaf cells clipped to `domain`; `None` when no positive cell meets it.
    pub fn to_boxes(&self, domain: &AxisBox) -> Option<BoxUnion> {
        let mut out = Vec::new();
        collect_boxes(self, domain.lower().to_vec(), domain.upper().to_vec(), &mut out);
        if out.is_empty() {
            None
        } else {
            // Leaf cells of a tree are interior-disjoint by construction.
            Some(BoxUnion::new(out).expect("leaf cells are interior-disjoint"))
        }
    }

    /// Lists every split as `(feature, threshold)`, depth-first.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        let mut v = Vec::new();
        fn walk(n: &TreeNode, v: &mut Vec<(usize, f64)>) {
            if let TreeNode::Split { feature, threshold, left, right } = n {
                v.push((*feature, *threshold));
                walk(left, v);
                walk(right, v);
            }
        }
        walk(self, &mut v);
        v
    }
}

fn collect_boxes(node: &TreeNode, lo: Vec<f64>, hi: Vec<f64>, out: &mut Vec<AxisBox>) {
    match node {
        TreeNode::Leaf { label } => {
            if *label == 1 {
                if let Ok(b) = AxisBox::new(lo, hi) {
                    out.push(b);
                }
            }
        }
        TreeNode::Split { feature, threshold, left, right } => {
            let j = *feature;
            if *threshold > lo[j] {
                let mut h = hi.clone();
                h[j] = h[j].min(*threshold);
                collect_boxes(left, lo.clone(), h, out);
            }
            if *threshold < hi[j] {
                let mut l = lo;
                l[j] = l[j].max(*threshold);
                collect_boxes(right, l, hi, out);
            }
        }
    }
}

/// Checked prediction.
pub fn predict(tree: &TreeNode, x: &[f64]) -> Result<u8> {
    if let Some(f) = tree.max_feature() {
        if f >= x.len() {
            return Err(Error::DimensionMismatch { expected: f + 1, got: x.len() });
        }
    }
    Ok(tree.predict(x))
}

pub fn tree_to_boxes(tree: &TreeNode, domain: &AxisBox) -> Option<BoxUnion> {
    tree.to_boxes(domain)
}

fn gini_weighted(n1: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = n1 as f64 / n as f64;
    // n * (1 - p² - (1-p)²)
    n as f64 * 2.0 * p * (1.0 - p)
}

fn majority(y: &[u8], idx: &[usize]) -> u8 {
    let ones = idx.iter().filter(|&&i| y[i] == 1).count();
    u8::from(2 * ones > idx.len())
}

/// Fits a tree by greedy Gini splitting with midpoint thresholds.
///
/// Impure nodes split even at zero Gini gain, so XOR-like targets can be
/// resolved one level down. Ties between candidate splits keep the first
/// (lowest feature, lowest threshold).
pub fn fit_tree(x: &Matrix, y: &[u8], cfg: &TreeConfig) -> Result<TreeNode> {
    if x.rows() == 0 {
        return Err(Error::Empty("training data"));
    }
    check_dim(x.rows(), y.len())?;
    if y.iter().any(|&v| v > 1) {
        return Err(Error::invalid("labels", "must be 0 or 1"));
    }
    if cfg.min_leaf == 0 {
        return Err(Error::invalid("min_leaf", "must be at least 1"));
    }
    if x.rows() < 2 * cfg.min_leaf {
        return Err(Error::invalid("data", format!("need at least {} rows", 2 * cfg.min_leaf)));
    }
    let idx: Vec<usize> = (0..x.rows()).collect();
    Ok(grow(x, y, idx, 0, cfg))
}

fn grow(x: &Matrix, y: &[u8], idx: Vec<usize>, depth: usize, cfg: &TreeConfig) -> TreeNode {
    let n = idx.len();
    let ones = idx.iter().filter(|&&i| y[i] == 1).count();
    if ones == 0 || ones == n || depth >= cfg.max_depth || n < 2 * cfg.min_leaf {
        return TreeNode::leaf(majority(y, &idx));
    }
    let parent = gini_weighted(ones, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.clone();
    for j in 0..x.cols() {
        order.sort_by(|&a, &b| x.row(a)[j].total_cmp(&x.row(b)[j]));
        let mut left_ones = 0;
        for k in 0..n - 1 {
            left_ones += usize::from(y[order[k]] == 1);
            let (v, w) = (x.row(order[k])[j], x.row(order[k + 1])[j]);
            let nl = k + 1;
            if v == w || nl < cfg.min_leaf || n - nl < cfg.min_leaf {
                continue;
            }
            let imp = gini_weighted(left_ones, nl) + gini_weighted(ones - left_ones, n - nl);
            if best.is_none_or(|b| imp < b.0 - 1e-12) {
                best = Some((imp, j, 0.5 * (v + w)));
            }
        }
    }
    match best {
        Some((imp, j, theta)) if imp <= parent + 1e-12 => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x.row(i)[j] <= theta);
            TreeNode::split(j, theta, grow(x, y, l, depth + 1, cfg), grow(x, y, r, depth + 1, cfg))
        }
        _ => TreeNode::leaf(majority(y, &idx)),
    }
}

/// Random tree over `[0,1]^d` with uniform thresholds and random leaf labels.
///
/// Each internal node stops early with probability `stop_prob`. Used by tests
/// and benchmarks.
pub fn random_tree(rng: &mut Rng, d: usize, max_depth: usize, stop_prob: f64) -> TreeNode {
    if max_depth == 0 || (max_depth > 0 && rng.random::<f64>() < stop_prob) {
        return TreeNode::leaf(u8::from(rng.random::<bool>()));
    }
    let feature = rng.random_range(0..d);
    let threshold = rng.random_range(0.05..0.95);
    let left = random_tree(rng, d, max_depth - 1, stop_prob);
    let right = random_tree(rng, d, max_depth - 1, stop_prob);
    TreeNode::split(feature, threshold, left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn separable_1d_gives_depth_one() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let y: Vec<u8> = xs.iter().map(|&v| u8::from(v > 0.5)).collect();
        let x = Matrix::from_vec(20, 1, xs.clone()).unwrap();
        let t = fit_tree(&x, &y, &TreeConfig { max_depth: 4, min_leaf: 1 }).unwrap();
        assert_eq!(t.depth(), 1);
        let TreeNode::Split { threshold, .. } = t else { panic!("expected a split") };
        let below = xs.iter().copied().filter(|&v| v <= 0.5).fold(f64::MIN, f64::max);
        let above = xs.iter().copied().filter(|&v| v > 0.5).fold(f64::MAX, f64::min);
        assert!(threshold > below && threshold < above);
    }

    #[test]
    fn constant_labels_give_single_leaf() {
        let x = Matrix::from_vec(4, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = fit_tree(&x, &[0, 0, 0, 0], &TreeConfig::default()).unwrap();
        assert_eq!(t, TreeNode::leaf(0));
    }

    #[test]
    fn xor_resolved_at_depth_two() {
        let pts = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let rows: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y = [0u8, 1, 1, 0];
        // Brute force: no single axis split separates XOR, so depth 1 cannot exceed 3/4.
        let t1 = fit_tree(&x, &y, &TreeConfig { max_depth: 1, min_leaf: 1 }).unwrap();
        let acc1 = pts.iter().zip(&y).filter(|(p, l)| t1.predict(&p[..]) == **l).count();
        assert!(acc1 <= 3);
        let t = fit_tree(&x, &y, &TreeConfig { max_depth: 2, min_leaf: 1 }).unwrap();
        for (p, l) in pts.iter().zip(&y) {
            assert_eq!(t.predict(p), *l);
        }
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let x = Matrix::zeros(0, 2);
        assert!(matches!(fit_tree(&x, &[], &TreeConfig::default()), Err(Error::Empty(_))));
        let x = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(fit_tree(&x, &[0, 2], &TreeConfig::default()).is_err());
        assert!(fit_tree(&x, &[0, 1], &TreeConfig { max_depth: 2, min_leaf: 2 }).is_err());
    }

    #[test]
    fn ties_go_right() {
        let t = TreeNode::split(0, 0.5, TreeNode::leaf(0), TreeNode::leaf(1));
        assert_eq!(t.predict(&[0.5, 0.0]), 0);
        assert_eq!(t.predict(&[0.7, 0.0]), 1);
        assert_eq!(TreeNode::leaf(1).predict(&[3.0]), 1);
        assert!(predict(&t, &[]).is_err());
    }

    #[test]
    fn boxes_of_simple_trees() {
        let dom = AxisBox::unit_cube(2).unwrap();
        let u = TreeNode::leaf(1).to_boxes(&dom).unwrap();
        assert_eq!(u.boxes(), &[dom.clone()]);
        let t = TreeNode::split(0, 0.5, TreeNode::leaf(0), TreeNode::leaf(1));
        let u = t.to_boxes(&dom).unwrap();
        assert_eq!(u.boxes(), &[AxisBox::new(vec![0.5, 0.0], vec![1.0, 1.0]).unwrap()]);
        assert!(TreeNode::leaf(0).to_boxes(&dom).is_none());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = rng_from_seed(3);
        let t = random_tree(&mut rng, 3, 4, 0.2);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<TreeNode>(&s).unwrap(), t);
    }
}
