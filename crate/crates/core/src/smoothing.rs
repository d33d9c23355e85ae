//! Ramp, logistic and Gaussian surrogates of decision-tree indicators.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{AxisBox, BoxUnion};
use crate::quad::{normal_cdf, normal_pdf};
use crate::trees::TreeNode;

/// One half-space test `w·x + b > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Split {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        if w.is_empty() || w.iter().all(|v| *v == 0.0) {
            return Err(Error::invalid("w", "split normal must be nonzero"));
        }
        if !(b.is_finite() && w.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid("split", "coefficients must be finite"));
        }
        Ok(Split { w, b })
    }

    /// `±e_j` split: `sign * x_j + b`.
    pub fn axis(d: usize, j: usize, sign: f64, b: f64) -> Result<Self> {
        if j >= d {
            return Err(Error::invalid("feature", format!("index {j} out of range for d = {d}")));
        }
        let mut w = vec![0.0; d];
        w[j] = sign.signum();
        Split::new(w, b)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.w.iter().filter(|v| **v != 0.0).count() == 1 && self.w.iter().all(|v| v.abs() == 1.0 || *v == 0.0)
    }

    fn norm(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// The `D` splits on the root-to-leaf path of one positive leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitList {
    pub splits: Vec<Split>,
}

impl SplitList {
    pub fn new(splits: Vec<Split>) -> Result<Self> {
        let first = splits.first().ok_or(Error::Empty("split list"))?;
        let d = first.w.len();
        for s in &splits {
            check_dim(d, s.w.len())?;
        }
        Ok(SplitList { splits })
    }

    pub fn depth(&self) -> usize {
        self.splits.len()
    }

    pub fn dim(&self) -> usize {
        self.splits[0].w.len()
    }

    /// The `2d` face tests `x_j − ℓ_j > 0`, `u_j − x_j > 0` of a box.
    pub fn from_box(b: &AxisBox) -> Self {
        let d = b.dim();
        let mut splits = Vec::with_capacity(2 * d);
        for j in 0..d {
            splits.push(Split::axis(d, j, 1.0, -b.lower()[j]).expect("valid axis"));
            splits.push(Split::axis(d, j, -1.0, b.upper()[j]).expect("valid axis"));
        }
        SplitList { splits }
    }

    /// One list per positive leaf of `tree`, built from its path tests.
    pub fn from_tree(tree: &TreeNode, d: usize) -> Result<Vec<SplitList>> {
        fn walk(n: &TreeNode, d: usize, path: &mut Vec<Split>, out: &mut Vec<SplitList>) -> Result<()> {
            match n {
                TreeNode::Leaf { label } => {
                    if *label == 1 && !path.is_empty() {
                        out.push(SplitList { splits: path.clone() });
                    }
                    Ok(())
                }
                TreeNode::Split { feature, threshold, left, right } => {
                    path.push(Split::axis(d, *feature, -1.0, *threshold)?);
                    walk(left, d, path, out)?;
                    path.pop();
                    path.push(Split::axis(d, *feature, 1.0, -*threshold)?);
                    walk(right, d, path, out)?;
                    path.pop();
                    Ok(())
                }
            }
        }
        let mut out = Vec::new();
        walk(tree, d, &mut Vec::new(), &mut out)?;
        Ok(out)
    }
}

/// Smoothing scheme and its width parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    Ramp { epsilon: f64 },
    Sigmoid { gamma: f64 },
    Gaussian { sigma: f64 },
}

impl Scheme {
    pub fn param(&self) -> f64 {
        match *self {
            Scheme::Ramp { epsilon } => epsilon,
            Scheme::Sigmoid { gamma } => gamma,
            Scheme::Gaussian { sigma } => sigma,
        }
    }

    fn with_param(&self, p: f64) -> Scheme {
        match self {
            Scheme::Ramp { .. } => Scheme::Ramp { epsilon: p },
            Scheme::Sigmoid { .. } => Scheme::Sigmoid { gamma: p },
            Scheme::Gaussian { .. } => Scheme::Gaussian { sigma: p },
        }
    }
}

/// What a surrogate smooths: split products (ramp, sigmoid) or boxes (Gaussian).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum SurrogateTarget {
    /// Sum over positive leaves of the per-leaf split products.
    Splits { leaves: Vec<SplitList> },
    Boxes { union: BoxUnion },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothSurrogate {
    pub scheme: Scheme,
    pub target: SurrogateTarget,
}

impl SmoothSurrogate {
    pub fn new(scheme: Scheme, target: SurrogateTarget) -> Result<Self> {
        let p = scheme.param();
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::invalid("param", format!("smoothing width must be positive, got {p}")));
        }
        match (&scheme, &target) {
            (Scheme::Gaussian { .. }, SurrogateTarget::Boxes { union }) => ensure_disjoint(union)?,
            (Scheme::Gaussian { .. }, SurrogateTarget::Splits { .. }) => {
                return Err(Error::Unsupported("gaussian smoothing needs a box target".into()))
            }
            (_, SurrogateTarget::Splits { leaves }) if leaves.is_empty() => {
                return Err(Error::Empty("surrogate leaves"))
            }
            _ => {}
        }
        Ok(SmoothSurrogate { scheme, target })
    }

    pub fn dim(&self) -> usize {
        match &self.target {
            SurrogateTarget::Splits { leaves } => leaves[0].dim(),
            SurrogateTarget::Boxes { union } => union.dim(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match (&self.scheme, &self.target) {
            (Scheme::Gaussian { sigma }, SurrogateTarget::Boxes { union }) => eval_gaussian_box(union, *sigma, x),
            (Scheme::Ramp { .. } | Scheme::Sigmoid { .. }, SurrogateTarget::Splits { leaves }) => {
                let mut total = 0.0;
                for leaf in leaves {
                    total += eval_product_surrogate(&self.scheme, leaf, x)?;
                }
                Ok(total)
            }
            (Scheme::Ramp { .. } | Scheme::Sigmoid { .. }, SurrogateTarget::Boxes { union }) => {
                let mut total = 0.0;
                for b in union.boxes() {
                    total += eval_product_surrogate(&self.scheme, &SplitList::from_box(b), x)?;
                }
                Ok(total)
            }
            (Scheme::Gaussian { .. }, SurrogateTarget::Splits { .. }) => {
                Err(Error::Unsupported("gaussian smoothing needs a box target".into()))
            }
        }
    }

    /// The hard indicator the surrogate converges to.
    pub fn indicator(&self, x: &[f64]) -> Result<f64> {
        match &self.target {
            SurrogateTarget::Boxes { union } => Ok(f64::from(u8::from(union.contains(x)?))),
            SurrogateTarget::Splits { leaves } => {
                let mut v = 0.0;
                for leaf in leaves {
                    check_dim(leaf.dim(), x.len())?;
                    if leaf.splits.iter().all(|s| s.eval(x) > 0.0) {
                        v += 1.0;
                    }
                }
                Ok(v)
            }
        }
    }

    /// Distance from `x` to the nearest decision boundary the surrogate smooths.
    pub fn boundary_margin(&self, x: &[f64]) -> Result<f64> {
        match &self.target {
            SurrogateTarget::Boxes { union } => match self.scheme {
                Scheme::Gaussian { .. } => union.boundary_distance(x),
                _ => {
                    check_dim(union.dim(), x.len())?;
                    Ok(union
                        .boxes()
                        .iter()
                        .flat_map(|b| SplitList::from_box(b).splits)
                        .map(|s| s.eval(x).abs() / s.norm())
                        .fold(f64::INFINITY, f64::min))
                }
            },
            SurrogateTarget::Splits { leaves } => {
                let mut m = f64::INFINITY;
                for leaf in leaves {
                    check_dim(leaf.dim(), x.len())?;
                    for s in &leaf.splits {
                        m = m.min(s.eval(x).abs() / s.norm());
                    }
                }
                Ok(m)
            }
        }
    }

    fn factor_count(&self) -> usize {
        match &self.target {
            SurrogateTarget::Splits { leaves } => leaves.iter().map(SplitList::depth).sum(),
            SurrogateTarget::Boxes { union } => union.boxes().len() * 2 * union.dim(),
        }
    }
}

fn ensure_disjoint(union: &BoxUnion) -> Result<()> {
    if union.overlapping_allowed() {
        let b = union.boxes();
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                if b[i].interiors_overlap(&b[j]) {
                    return Err(Error::OverlappingUnion { first: i, second: j });
                }
            }
        }
    }
    Ok(())
}

fn check_width(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive, got {v}")))
    }
}

/// Centred ramp `ρ_ε`: 0 below `−ε/2`, 1 above `ε/2`, affine between.
pub fn ramp(z: f64, epsilon: f64) -> Result<f64> {
    check_width("epsilon", epsilon)?;
    Ok(ramp_unchecked(z, epsilon))
}

pub(crate) fn ramp_unchecked(z: f64, epsilon: f64) -> f64 {
    if z <= -0.5 * epsilon {
        0.0
    } else if z >= 0.5 * epsilon {
        1.0
    } else {
        z / epsilon + 0.5
    }
}

/// Logistic `σ_γ(z) = 1 / (1 + e^{−z/γ})`, evaluated without overflow.
pub fn sigmoid(z: f64, gamma: f64) -> Result<f64> {
    check_width("gamma", gamma)?;
    Ok(sigmoid_unchecked(z, gamma))
}

pub(crate) fn sigmoid_unchecked(z: f64, gamma: f64) -> f64 {
    let s = z / gamma;
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `∏_i ρ_ε(w_i·x + b_i)` or `∏_i σ_γ(w_i·x + b_i)` for one leaf.
pub fn eval_product_surrogate(scheme: &Scheme, leaf: &SplitList, x: &[f64]) -> Result<f64> {
    check_dim(leaf.dim(), x.len())?;
    match *scheme {
        Scheme::Ramp { epsilon } => {
            check_width("epsilon", epsilon)?;
            Ok(leaf.splits.iter().map(|s| ramp_unchecked(s.eval(x), epsilon)).product())
        }
        Scheme::Sigmoid { gamma } => {
            check_width("gamma", gamma)?;
            Ok(leaf.splits.iter().map(|s| sigmoid_unchecked(s.eval(x), gamma)).product())
        }
        Scheme::Gaussian { .. } => {
            Err(Error::Unsupported("gaussian smoothing is not a split product".into()))
        }
    }
}

/// `P(lo < Z < hi)` for standard normal `Z`, using the tail that avoids cancellation.
pub(crate) fn normal_interval(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        normal_cdf(-lo) - normal_cdf(-hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    }
}

fn gaussian_box_value(b: &AxisBox, sigma: f64, x: &[f64]) -> f64 {
    b.lower()
        .iter()
        .zip(b.upper())
        .zip(x)
        .map(|((l, u), v)| normal_interval((l - v) / sigma, (u - v) / sigma))
        .product()
}

/// Closed form of `1_A ⋆ G_σ` for an interior-disjoint box union.
pub fn eval_gaussian_box(union: &BoxUnion, sigma: f64, x: &[f64]) -> Result<f64> {
    check_width("sigma", sigma)?;
    check_dim(union.dim(), x.len())?;
    ensure_disjoint(union)?;
    Ok(union.boxes().iter().map(|b| gaussian_box_value(b, sigma, x)).sum())
}

/// Gradient of [`eval_gaussian_box`] in `x`.
pub fn gaussian_box_gradient(union: &BoxUnion, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_width("sigma", sigma)?;
    check_dim(union.dim(), x.len())?;
    ensure_disjoint(union)?;
    let d = x.len();
    let mut grad = vec![0.0; d];
    for b in union.boxes() {
        let factors: Vec<f64> = (0..d)
            .map(|j| normal_interval((b.lower()[j] - x[j]) / sigma, (b.upper()[j] - x[j]) / sigma))
            .collect();
        for k in 0..d {
            let others: f64 = (0..d).filter(|&j| j != k).map(|j| factors[j]).product();
            let dk = (normal_pdf((b.lower()[k] - x[k]) / sigma) - normal_pdf((b.upper()[k] - x[k]) / sigma)) / sigma;
            grad[k] += others * dk;
        }
    }
    Ok(grad)
}

/// Inverse of the standard normal upper tail, by bisection.
fn normal_upper_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(-mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Width at which the surrogate is within `tol` of the indicator at any
/// point whose boundary margin is at least `margin`.
pub fn limit_width(s: &SmoothSurrogate, margin: f64, tol: f64) -> f64 {
    let factors = s.factor_count().max(1) as f64;
    match s.scheme {
        // Outside every width-ε slab the ramp equals the hard test.
        Scheme::Ramp { .. } => 2.0 * margin,
        // Each factor is off by less than tol/D when |z| ≥ γ ln(D/tol).
        Scheme::Sigmoid { .. } => margin / (factors / tol).ln().max(1.0),
        // 2d faces of the containing box plus one half-space bound per other box.
        Scheme::Gaussian { .. } => {
            let SurrogateTarget::Boxes { union } = &s.target else { unreachable!() };
            let terms = (2 * union.dim() + union.boxes().len()) as f64;
            margin / normal_upper_quantile(tol / terms)
        }
    }
}

/// Checks `|surrogate(x) − 1_A(x)| ≤ tol` at the scheme's limit width for `margin`.
///
/// Fails with [`Error::WithinMargin`] if `x` is closer than `margin` to a boundary.
pub fn surrogate_limit_check(s: &SmoothSurrogate, x: &[f64], margin: f64, tol: f64) -> Result<bool> {
    check_width("margin", margin)?;
    check_width("tol", tol)?;
    if s.boundary_margin(x)? < margin {
        return Err(Error::WithinMargin { margin });
    }
    let width = limit_width(s, margin, tol).min(s.scheme.param());
    let limited = SmoothSurrogate { scheme: s.scheme.with_param(width), target: s.target.clone() };
    Ok((limited.eval(x)? - limited.indicator(x)?).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(l: f64, u: f64) -> BoxUnion {
        BoxUnion::single(AxisBox::new(vec![l], vec![u]).unwrap())
    }

    #[test]
    fn ramp_values() {
        assert_eq!(ramp(0.0, 0.2).unwrap(), 0.5);
        assert_eq!(ramp(-0.1, 0.2).unwrap(), 0.0);
        assert!((ramp(0.05, 0.2).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(ramp(0.3, 0.2).unwrap(), 1.0);
        assert!(ramp(0.0, 0.0).is_err());
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0, 1.0).unwrap(), 0.5);
        let g = 0.3;
        assert!((sigmoid(g * 3f64.ln(), g).unwrap() - 0.75).abs() < 1e-15);
        let tiny = sigmoid(-50.0, 0.1).unwrap();
        assert!(tiny < 1e-200 && tiny >= 0.0);
        assert_eq!(sigmoid(1e6, 1e-3).unwrap(), 1.0);
        assert!(sigmoid(1.0, -1.0).is_err());
    }

    #[test]
    fn product_examples() {
        let one = SplitList::new(vec![Split::axis(1, 0, 1.0, 0.0).unwrap()]).unwrap();
        let ramp = Scheme::Ramp { epsilon: 0.2 };
        assert_eq!(eval_product_surrogate(&ramp, &one, &[0.0]).unwrap(), 0.5);
        let two = SplitList::new(vec![Split::axis(1, 0, 1.0, 0.0).unwrap(); 2]).unwrap();
        assert_eq!(eval_product_surrogate(&ramp, &two, &[0.5]).unwrap(), 1.0);
        let mixed = SplitList::new(vec![Split::axis(1, 0, 1.0, 0.0).unwrap(), Split::axis(1, 0, 1.0, 0.05).unwrap()])
            .unwrap();
        assert!((eval_product_surrogate(&ramp, &mixed, &[0.0]).unwrap() - 0.375).abs() < 1e-15);
        assert!(eval_product_surrogate(&Scheme::Gaussian { sigma: 1.0 }, &one, &[0.0]).is_err());
    }

    #[test]
    fn gaussian_box_examples() {
        let u = interval(0.0, 10.0);
        assert!((eval_gaussian_box(&u, 0.1, &[5.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((eval_gaussian_box(&u, 0.1, &[0.0]).unwrap() - 0.5).abs() < 1e-12);
        let a = AxisBox::cube(2, 0.0, 1.0).unwrap();
        let b = AxisBox::cube(2, 0.5, 1.5).unwrap();
        let over = BoxUnion::new_overlapping(vec![a, b]).unwrap();
        assert!(matches!(eval_gaussian_box(&over, 0.1, &[0.0, 0.0]), Err(Error::OverlappingUnion { .. })));
    }

    #[test]
    fn splits_from_tree_match_indicator() {
        let t = TreeNode::split(0, 0.5, TreeNode::leaf(0), TreeNode::split(1, 0.3, TreeNode::leaf(1), TreeNode::leaf(0)));
        let leaves = SplitList::from_tree(&t, 2).unwrap();
        assert_eq!(leaves.len(), 1);
        let s = SmoothSurrogate::new(Scheme::Ramp { epsilon: 0.01 }, SurrogateTarget::Splits { leaves }).unwrap();
        assert_eq!(s.eval(&[0.8, 0.1]).unwrap(), 1.0);
        assert_eq!(s.eval(&[0.2, 0.1]).unwrap(), 0.0);
        assert_eq!(s.indicator(&[0.8, 0.1]).unwrap(), 1.0);
    }

    #[test]
    fn limit_check_examples() {
        // Ramp: margin 0.1, ε = 0.05 → exact.
        let leaves = vec![SplitList::new(vec![Split::axis(1, 0, 1.0, 0.0).unwrap()]).unwrap()];
        let s = SmoothSurrogate::new(Scheme::Ramp { epsilon: 0.05 }, SurrogateTarget::Splits { leaves: leaves.clone() })
            .unwrap();
        assert_eq!(s.eval(&[0.1]).unwrap(), s.indicator(&[0.1]).unwrap());
        assert!(surrogate_limit_check(&s, &[0.1], 0.1, 1e-12).unwrap());
        assert!(matches!(surrogate_limit_check(&s, &[0.01], 0.1, 1e-3), Err(Error::WithinMargin { .. })));

        // Sigmoid at γ = m / ln(1/tol): one factor, error tol/(1+tol).
        let m = 0.2;
        let tol = 1e-6;
        let gamma = m / (1.0f64 / tol).ln();
        let s = SmoothSurrogate::new(Scheme::Sigmoid { gamma }, SurrogateTarget::Splits { leaves }).unwrap();
        assert!((s.eval(&[m]).unwrap() - 1.0).abs() <= tol);
        assert!(surrogate_limit_check(&s, &[m], m, tol).unwrap());

        // Gaussian at σ = m/5 next to one face: error Φ(−5) plus the far face's negligible share.
        let u = interval(0.0, 10.0);
        let s = SmoothSurrogate::new(Scheme::Gaussian { sigma: m / 5.0 }, SurrogateTarget::Boxes { union: u }).unwrap();
        let err = (s.eval(&[m]).unwrap() - 1.0).abs();
        assert!((err - normal_cdf(-5.0)).abs() < 1e-15);
        assert!(err < 2.9e-7);
    }
}
