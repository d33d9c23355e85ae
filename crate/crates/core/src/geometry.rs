//! Axis-aligned boxes, finite unions of boxes and their distance functions.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fit::log_log_fit;
use crate::mc::{check_sampler_dim, expectations, Sampler};

/// A closed, nondegenerate box `∏ [lower_j, upper_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct AxisBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBox> for AxisBox {
    type Error = Error;
    fn try_from(raw: RawBox) -> Result<Self> {
        AxisBox::new(raw.lower, raw.upper)
    }
}

impl From<AxisBox> for RawBox {
    fn from(b: AxisBox) -> Self {
        RawBox { lower: b.lower, upper: b.upper }
    }
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Empty("box bounds"));
        }
        check_dim(lower.len(), upper.len())?;
        for (axis, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l >= u {
                return Err(Error::DegenerateBox { axis, lower: l, upper: u });
            }
        }
        Ok(AxisBox { lower, upper })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn unit_cube(d: usize) -> Result<Self> {
        Self::cube(d, 0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn sides(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.sides().iter().product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// `Σ_j (ℓ_j − x_j)_+ + (x_j − u_j)_+`.
    pub fn l1_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (l - v).max(0.0) + (v - u).max(0.0))
            .sum()
    }

    /// Euclidean distance from `x` to the boundary of the box (inside or out).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(v, (l, u))| (v - l).min(u - v))
                .fold(f64::INFINITY, f64::min)
        } else {
            x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(v, (l, u))| {
                    let o = (l - v).max(0.0) + (v - u).max(0.0);
                    o * o
                })
                .sum::<f64>()
                .sqrt()
        }
    }

    /// True when the open interiors of the two boxes intersect.
    pub fn interiors_overlap(&self, other: &AxisBox) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(other.lower.iter().zip(&other.upper))
            .all(|((l1, u1), (l2, u2))| l1.max(*l2) < u1.min(*u2))
    }

    /// Hausdorff measures of the face skeletons of every codimension.
    pub fn skeleton_measures(&self) -> FaceSkeleton {
        let sides = self.sides();
        let d = sides.len();
        // esym[k] = k-th elementary symmetric polynomial of the side lengths.
        let mut esym = vec![0.0; d + 1];
        esym[0] = 1.0;
        for a in &sides {
            for k in (1..=d).rev() {
                esym[k] += esym[k - 1] * a;
            }
        }
        let measures = (1..=d).map(|r| 2f64.powi(r as i32) * esym[d - r]).collect();
        FaceSkeleton { dim: d, measures }
    }
}

/// `measures[r - 1] = H^{d-r}(Σ_{d-r})`, the total `(d−r)`-volume of the
/// `(d−r)`-dimensional faces, for `r = 1..=d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceSkeleton {
    pub dim: usize,
    pub measures: Vec<f64>,
}

impl FaceSkeleton {
    /// Measure of the codimension-`r` skeleton, `1 ≤ r ≤ d`.
    pub fn codim(&self, r: usize) -> f64 {
        assert!((1..=self.dim).contains(&r), "codimension {r} out of range");
        self.measures[r - 1]
    }
}

/// A finite union of closed boxes of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUnion", into = "RawUnion")]
pub struct BoxUnion {
    dim: usize,
    boxes: Vec<AxisBox>,
    overlapping_allowed: bool,
}

#[derive(Serialize, Deserialize)]
struct RawUnion {
    dim: usize,
    boxes: Vec<AxisBox>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    overlapping_allowed: bool,
}

impl TryFrom<RawUnion> for BoxUnion {
    type Error = Error;
    fn try_from(raw: RawUnion) -> Result<Self> {
        let u = BoxUnion::build(raw.boxes, raw.overlapping_allowed)?;
        check_dim(raw.dim, u.dim)?;
        Ok(u)
    }
}

impl From<BoxUnion> for RawUnion {
    fn from(u: BoxUnion) -> Self {
        RawUnion { dim: u.dim, boxes: u.boxes, overlapping_allowed: u.overlapping_allowed }
    }
}

impl BoxUnion {
    /// Interior-disjoint union; overlapping members are an error.
    pub fn new(boxes: Vec<AxisBox>) -> Result<Self> {
        Self::build(boxes, false)
    }

    /// Union whose members may overlap.
    pub fn new_overlapping(boxes: Vec<AxisBox>) -> Result<Self> {
        Self::build(boxes, true)
    }

    fn build(boxes: Vec<AxisBox>, overlapping_allowed: bool) -> Result<Self> {
        let first = boxes.first().ok_or(Error::Empty("box union"))?;
        let dim = first.dim();
        for b in &boxes {
            check_dim(dim, b.dim())?;
        }
        if !overlapping_allowed {
            for i in 0..boxes.len() {
                for j in i + 1..boxes.len() {
                    if boxes[i].interiors_overlap(&boxes[j]) {
                        return Err(Error::OverlappingUnion { first: i, second: j });
                    }
                }
            }
        }
        Ok(BoxUnion { dim, boxes, overlapping_allowed })
    }

    pub fn single(b: AxisBox) -> Self {
        BoxUnion { dim: b.dim(), boxes: vec![b], overlapping_allowed: false }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn overlapping_allowed(&self) -> bool {
        self.overlapping_allowed
    }

    /// Sum of member volumes (the union volume when interiors are disjoint).
    pub fn volume(&self) -> f64 {
        self.boxes.iter().map(AxisBox::volume).sum()
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim, x.len())?;
        Ok(self.boxes.iter().any(|b| b.contains(x)))
    }

    pub fn l1_distance(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.boxes.iter().map(|b| b.l1_distance(x)).fold(f64::INFINITY, f64::min))
    }

    /// Minimum over member boxes of the distance to each member's boundary.
    ///
    /// Faces shared by two adjacent members still count as boundary here.
    pub fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.boxes.iter().map(|b| b.boundary_distance(x)).fold(f64::INFINITY, f64::min))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Monte Carlo tube masses `P(dist(X, ∂A) ≤ t)` with a power-law fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeMassEstimate {
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
    /// Fitted `β` in `C t^β`; `None` if fewer than two radii fall in the fit window.
    pub tube_exponent: Option<f64>,
    pub tube_constant: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

/// Default upper mass for radii used in the power-law fit.
pub const TUBE_FIT_MAX_MASS: f64 = 0.2;

pub fn estimate_tube_mass(
    union: &BoxUnion,
    sampler: &Sampler,
    radii: &[f64],
    n: usize,
    seed: u64,
    max_mass: f64,
) -> Result<TubeMassEstimate> {
    if radii.is_empty() {
        return Err(Error::Empty("tube radii"));
    }
    if radii.iter().any(|t| !(*t > 0.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("radii", "must be positive and strictly increasing"));
    }
    if n < 1000 {
        return Err(Error::invalid("n", format!("need at least 1000 samples, got {n}")));
    }
    check_sampler_dim(sampler, union.dim())?;
    let est = expectations(sampler, n, seed, radii.len(), |x, out| {
        let dist = union.boundary_distance(x).unwrap_or(f64::INFINITY);
        for (o, t) in out.iter_mut().zip(radii) {
            *o = if dist <= *t { 1.0 } else { 0.0 };
        }
    })?;
    let masses: Vec<f64> = est.iter().map(|e| e.mean).collect();
    let (fx, fy): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(&masses)
        .filter(|(_, m)| **m > 0.0 && **m <= max_mass)
        .map(|(t, m)| (*t, *m))
        .unzip();
    let fit = if fx.len() >= 2 { log_log_fit(&fx, &fy).ok() } else { None };
    Ok(TubeMassEstimate {
        radii: radii.to_vec(),
        masses,
        tube_exponent: fit.map(|f| f.slope),
        tube_constant: fit.map(|f| f.intercept.exp()),
        n_samples: n,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> BoxUnion {
        BoxUnion::single(AxisBox::unit_cube(2).unwrap())
    }

    #[test]
    fn contains_closed_box() {
        let u = unit_square();
        assert!(u.contains(&[0.5, 0.5]).unwrap());
        assert!(u.contains(&[1.0, 0.5]).unwrap());
        assert!(!u.contains(&[1.5, 0.5]).unwrap());
        assert!(matches!(u.contains(&[0.5]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn l1_distance_examples() {
        let u = unit_square();
        assert_eq!(u.l1_distance(&[2.0, 0.5]).unwrap(), 1.0);
        assert_eq!(u.l1_distance(&[2.0, 2.0]).unwrap(), 2.0);
        assert_eq!(u.l1_distance(&[0.3, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn boundary_distance_examples() {
        let u = unit_square();
        assert_eq!(u.boundary_distance(&[0.5, 0.5]).unwrap(), 0.5);
        assert!((u.boundary_distance(&[1.25, 0.5]).unwrap() - 0.25).abs() < 1e-15);
        // Dense sampling of the four edges as an independent oracle.
        let x = [1.25, 1.25];
        let m = 40_000;
        let mut best = f64::INFINITY;
        for i in 0..=m {
            let s = i as f64 / m as f64;
            for p in [[s, 0.0], [s, 1.0], [0.0, s], [1.0, s]] {
                best = best.min(((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)).sqrt());
            }
        }
        let got = u.boundary_distance(&x).unwrap();
        assert!((got - best).abs() < 1e-9);
        assert!((got - 0.25 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(matches!(
            AxisBox::new(vec![0.0, 1.0], vec![1.0, 1.0]),
            Err(Error::DegenerateBox { axis: 1, .. })
        ));
        assert!(AxisBox::new(vec![], vec![]).is_err());
    }

    #[test]
    fn skeleton_examples() {
        let s = AxisBox::unit_cube(2).unwrap().skeleton_measures();
        assert_eq!(s.measures, vec![4.0, 4.0]);
        let s = AxisBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap().skeleton_measures();
        assert_eq!(s.measures, vec![6.0, 4.0]);
        let s = AxisBox::unit_cube(3).unwrap().skeleton_measures();
        assert_eq!(s.measures, vec![6.0, 12.0, 8.0]);
    }

    #[test]
    fn overlapping_union_rejected_unless_flagged() {
        let a = AxisBox::cube(2, 0.0, 1.0).unwrap();
        let b = AxisBox::cube(2, 0.5, 1.5).unwrap();
        let c = AxisBox::new(vec![1.0, 0.0], vec![2.0, 1.0]).unwrap();
        assert!(matches!(
            BoxUnion::new(vec![a.clone(), b.clone()]),
            Err(Error::OverlappingUnion { first: 0, second: 1 })
        ));
        assert!(BoxUnion::new_overlapping(vec![a.clone(), b]).is_ok());
        // Touching along a face is fine.
        assert!(BoxUnion::new(vec![a, c]).is_ok());
    }

    #[test]
    fn json_layout() {
        let u = unit_square();
        let s = u.to_json().unwrap();
        assert_eq!(s, r#"{"dim":2,"boxes":[{"lower":[0.0,0.0],"upper":[1.0,1.0]}]}"#);
        assert_eq!(BoxUnion::from_json(&s).unwrap(), u);
        assert!(BoxUnion::from_json(r#"{"dim":3,"boxes":[{"lower":[0,0],"upper":[1,1]}]}"#).is_err());
        assert!(BoxUnion::from_json(r#"{"dim":1,"boxes":[{"lower":[1],"upper":[0]}]}"#).is_err());
    }

    #[test]
    fn tube_mass_edge_cases() {
        let u = BoxUnion::single(AxisBox::cube(2, 0.25, 0.75).unwrap());
        let s = Sampler::unit_cube(2).unwrap();
        let big = estimate_tube_mass(&u, &s, &[10.0], 5000, 1, TUBE_FIT_MAX_MASS).unwrap();
        assert_eq!(big.masses, vec![1.0]);
        assert!(big.tube_exponent.is_none());
        assert!(estimate_tube_mass(&u, &s, &[0.1], 0, 1, 0.2).is_err());
        assert!(estimate_tube_mass(&u, &s, &[], 5000, 1, 0.2).is_err());
        assert!(estimate_tube_mass(&u, &s, &[0.2, 0.1], 5000, 1, 0.2).is_err());
    }
}
