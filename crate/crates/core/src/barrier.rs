//! Smooth barrier scores whose level set `{S ≥ 1}` is exactly a box union.
//!
//! `ϑ_{λ,ε}(t) = (1 − h_ε(t)) e^{λ min(t,0)} + h_ε(t)` with
//! `h_ε(t) = H((t + ε)/ε)` and `ε = c0/λ`. The per-box score is the product
//! of `ϑ` over the `2d` signed face distances, and unions combine boxes as
//! `1 − ∏_m (1 − S_m)`.
//!
//! Near a face the deficit `1 − ϑ(t)` behaves like `exp(−ε/|t|)`, which
//! rounds to zero in `f64` long before `t` does. Classification therefore
//! works with `ln(1 − S)` rather than with `S`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{AxisBox, BoxUnion};
use crate::mc::{check_sampler_dim, expectation, McEstimate, Sampler};

/// Default layer constant `c0`.
pub const DEFAULT_C0: f64 = 1.0;

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// The `C∞` cutoff `H(s) = e(s) / (e(s) + e(1 − s))`, `e(s) = exp(−1/s)` for `s > 0`.
///
/// `H = 0` on `s ≤ 0`, `H = 1` on `s ≥ 1`, and every derivative vanishes at both ends.
pub fn cutoff_h(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        // e(1-s)/e(s) = exp(1/s - 1/(1-s))
        let z = 1.0 / s - 1.0 / (1.0 - s);
        if z > 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// `ln(1 − H(s))`, finite for every `s < 1`.
fn ln_one_minus_h(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        f64::NEG_INFINITY
    } else {
        -softplus(1.0 / (1.0 - s) - 1.0 / s)
    }
}

/// Sharpness `λ ≥ 1` and layer constant `c0`, giving layer width `ε = c0/λ ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct BarrierParams {
    lambda: f64,
    c0: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    lambda: f64,
    c0: f64,
}

impl TryFrom<RawParams> for BarrierParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        BarrierParams::new(r.lambda, r.c0)
    }
}

impl From<BarrierParams> for RawParams {
    fn from(p: BarrierParams) -> Self {
        RawParams { lambda: p.lambda, c0: p.c0 }
    }
}

impl BarrierParams {
    pub fn new(lambda: f64, c0: f64) -> Result<Self> {
        if !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be ≥ 1, got {lambda}")));
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::invalid("c0", format!("must be positive, got {c0}")));
        }
        if c0 / lambda > 1.0 {
            return Err(Error::invalid("c0", format!("layer width c0/λ = {} exceeds 1", c0 / lambda)));
        }
        Ok(BarrierParams { lambda, c0 })
    }

    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::new(lambda, DEFAULT_C0)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn epsilon(&self) -> f64 {
        self.c0 / self.lambda
    }

    /// Number of vanishing endpoint derivatives of `H`; the bump is `C∞`.
    pub fn smooth_order(&self) -> u32 {
        u32::MAX
    }

    /// `h_ε(t) = H((t + ε)/ε)`.
    pub fn layer(&self, t: f64) -> f64 {
        let eps = self.epsilon();
        cutoff_h((t + eps) / eps)
    }
}

/// One-sided barrier `ϑ_{λ,ε}(t)`: `e^{λt}` for `t ≤ −ε`, exactly 1 for `t ≥ 0`.
pub fn theta(t: f64, p: &BarrierParams) -> f64 {
    if t >= 0.0 {
        return 1.0;
    }
    let e = (p.lambda * t).exp();
    let eps = p.epsilon();
    if t <= -eps {
        return e;
    }
    let h = p.layer(t);
    (1.0 - h) * e + h
}

/// `ln(1 − ϑ(t))`; `−∞` exactly when `t ≥ 0`.
pub fn ln_theta_deficit(t: f64, p: &BarrierParams) -> f64 {
    if t >= 0.0 {
        return f64::NEG_INFINITY;
    }
    let eps = p.epsilon();
    let ln_gap = (-(p.lambda * t).exp_m1()).ln();
    ln_gap + ln_one_minus_h((t + eps) / eps)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln(1 − ∏(1 − q_i))` from the `ln q_i`.
fn ln_product_deficit(ln_q: &[f64]) -> f64 {
    let live: Vec<f64> = ln_q.iter().copied().filter(|v| *v > f64::NEG_INFINITY).collect();
    if live.is_empty() {
        return f64::NEG_INFINITY;
    }
    let max = live.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max < -600.0 {
        // 1 − ∏(1 − q) = Σ q to first order; the correction is below f64 resolution.
        log_sum_exp(&live)
    } else {
        let s: f64 = live.iter().map(|lq| (-lq.exp()).ln_1p()).sum();
        (-s.exp_m1()).ln()
    }
}

fn box_factors<'a>(b: &'a AxisBox, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    b.lower().iter().zip(b.upper()).zip(x).flat_map(|((l, u), v)| [u - v, v - l])
}

/// `S_B(x) = ∏_j ϑ(u_j − x_j) ϑ(x_j − ℓ_j)`.
pub fn score_box(b: &AxisBox, p: &BarrierParams, x: &[f64]) -> Result<f64> {
    check_dim(b.dim(), x.len())?;
    Ok(box_factors(b, x).map(|t| theta(t, p)).product())
}

/// `ln(1 − S_B(x))`.
pub fn ln_box_deficit(b: &AxisBox, p: &BarrierParams, x: &[f64]) -> Result<f64> {
    check_dim(b.dim(), x.len())?;
    let ln_q: Vec<f64> = box_factors(b, x).map(|t| ln_theta_deficit(t, p)).collect();
    Ok(ln_product_deficit(&ln_q))
}

/// `S(x) = 1 − ∏_m (1 − S_{B_m}(x))`.
pub fn score_union(u: &BoxUnion, p: &BarrierParams, x: &[f64]) -> Result<f64> {
    check_dim(u.dim(), x.len())?;
    let mut complement = 1.0;
    for b in u.boxes() {
        complement *= 1.0 - score_box(b, p, x)?;
    }
    Ok(1.0 - complement)
}

/// `ln(1 − S(x)) = Σ_m ln(1 − S_{B_m}(x))`.
pub fn ln_union_deficit(u: &BoxUnion, p: &BarrierParams, x: &[f64]) -> Result<f64> {
    check_dim(u.dim(), x.len())?;
    let mut acc = 0.0;
    for b in u.boxes() {
        acc += ln_box_deficit(b, p, x)?;
    }
    Ok(acc)
}

/// Thresholds the score at 1. Returns 1 iff `x` lies in the closed union.
pub fn exact_threshold_classify(u: &BoxUnion, p: &BarrierParams, x: &[f64]) -> Result<u8> {
    Ok(u8::from(ln_union_deficit(u, p, x)? == f64::NEG_INFINITY))
}

/// A barrier score bound to its target set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierScore {
    pub params: BarrierParams,
    pub target: BoxUnion,
}

impl BarrierScore {
    pub fn new(params: BarrierParams, target: BoxUnion) -> Self {
        BarrierScore { params, target }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        score_union(&self.target, &self.params, x)
    }

    pub fn classify(&self, x: &[f64]) -> Result<u8> {
        exact_threshold_classify(&self.target, &self.params, x)
    }

    pub fn rtv_upper_bound(&self) -> f64 {
        rtv_upper_bound(&self.target, &self.params)
    }
}

/// Monte Carlo estimate of `E|S(X) − 1_A(X)|`.
pub fn measure_calibration(
    u: &BoxUnion,
    p: &BarrierParams,
    sampler: &Sampler,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n < 10_000 {
        return Err(Error::invalid("n", format!("calibration needs at least 10^4 samples, got {n}")));
    }
    check_sampler_dim(sampler, u.dim())?;
    expectation(sampler, n, seed, |x| {
        let inside = u.boxes().iter().any(|b| b.contains(x));
        if inside {
            0.0
        } else {
            score_union(u, p, x).unwrap_or(f64::NAN)
        }
    })
}

/// `Σ_boxes Σ_{r=1}^{d} λ^{d+1−r} H^{d−r}(Σ_{d−r}(B))`, the skeleton bound with `C_d = 1`.
///
/// For a single box this is the shape functional of the RTV upper bound up to
/// a dimension constant; for unions it sums the per-box bounds, which is only
/// an upper bound when the boxes are well separated.
pub fn rtv_upper_bound(u: &BoxUnion, p: &BarrierParams) -> f64 {
    let d = u.dim();
    u.boxes()
        .iter()
        .map(|b| {
            let sk = b.skeleton_measures();
            (1..=d).map(|r| p.lambda.powi((d + 1 - r) as i32) * sk.codim(r)).sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lambda: f64, c0: f64) -> BarrierParams {
        BarrierParams::new(lambda, c0).unwrap()
    }

    #[test]
    fn cutoff_endpoints_and_symmetry() {
        assert_eq!(cutoff_h(-1.0), 0.0);
        assert_eq!(cutoff_h(2.0), 1.0);
        assert!((cutoff_h(0.5) - 0.5).abs() < 1e-15);
        for s in [0.1, 0.3, 0.77] {
            assert!((cutoff_h(s) + cutoff_h(1.0 - s) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cutoff_derivative_vanishes_at_ends() {
        let h = 1e-3;
        for s0 in [0.0, 1.0] {
            let d1 = (cutoff_h(s0 + h) - cutoff_h(s0 - h)) / (2.0 * h);
            assert!(d1.abs() < 1e-8, "H'({s0}) ≈ {d1}");
        }
    }

    #[test]
    fn theta_branches() {
        let q = p(2.0, 1.0);
        assert_eq!(theta(0.0, &q), 1.0);
        assert_eq!(theta(0.3, &q), 1.0);
        assert!((theta(-0.5, &q) - (-1f64).exp()).abs() < 1e-15);
        assert!((theta(-0.5, &q) - 0.367_879).abs() < 1e-6);
        assert_eq!(theta(-3.0, &q), (-6f64).exp());
    }

    #[test]
    fn deficit_matches_direct_value() {
        let q = p(3.0, 1.0);
        for t in [-0.9, -0.3, -0.1, -0.01] {
            let direct = 1.0 - theta(t, &q);
            let via_log = ln_theta_deficit(t, &q).exp();
            assert!((direct - via_log).abs() <= 1e-12 * direct.max(1e-300) + 1e-16, "t={t}");
        }
        // Deep in the layer the direct value rounds to 1 but the deficit does not.
        let t = -1e-3;
        assert_eq!(theta(t, &q), 1.0);
        assert!(ln_theta_deficit(t, &q).is_finite());
    }

    #[test]
    fn params_validation_and_json() {
        assert!(BarrierParams::new(0.5, 0.1).is_err());
        assert!(BarrierParams::new(2.0, 0.0).is_err());
        assert!(BarrierParams::new(2.0, 3.0).is_err());
        let q = p(4.0, 1.0);
        assert_eq!(q.epsilon(), 0.25);
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"lambda":4.0,"c0":1.0}"#);
        assert_eq!(serde_json::from_str::<BarrierParams>(&s).unwrap(), q);
        assert!(serde_json::from_str::<BarrierParams>(r#"{"lambda":0.1,"c0":1}"#).is_err());
    }

    #[test]
    fn score_box_examples() {
        let b = AxisBox::unit_cube(3).unwrap();
        let q = p(2.0, 1.0);
        assert_eq!(score_box(&b, &q, &[0.2, 0.5, 1.0]).unwrap(), 1.0);
        // One overhang δ ≥ ε on axis 0, other coordinates interior.
        let delta = 0.75;
        let v = score_box(&b, &q, &[1.0 + delta, 0.5, 0.5]).unwrap();
        assert!((v - (-2.0 * delta).exp()).abs() < 1e-15);
        assert!(score_box(&b, &q, &[1.0 + 1e-3, 0.5, 0.5]).unwrap() <= 1.0);
        assert!(ln_box_deficit(&b, &q, &[1.0 + 1e-3, 0.5, 0.5]).unwrap().is_finite());
        assert!(score_box(&b, &q, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn union_aggregation() {
        let a = AxisBox::cube(1, 0.0, 1.0).unwrap();
        let b = AxisBox::cube(1, 3.0, 4.0).unwrap();
        let u = BoxUnion::new(vec![a.clone(), b.clone()]).unwrap();
        let q = p(1.0, 1.0);
        assert_eq!(score_union(&u, &q, &[3.5]).unwrap(), 1.0);
        let x = [2.0];
        let s1 = score_box(&a, &q, &x).unwrap();
        let s2 = score_box(&b, &q, &x).unwrap();
        assert!((score_union(&u, &q, &x).unwrap() - (1.0 - (1.0 - s1) * (1.0 - s2))).abs() < 1e-15);
        let single = BoxUnion::single(a.clone());
        assert_eq!(score_union(&single, &q, &[1.4]).unwrap(), score_box(&a, &q, &[1.4]).unwrap());
    }

    #[test]
    fn classify_boundary_and_near_exterior() {
        let u = BoxUnion::single(AxisBox::unit_cube(2).unwrap());
        for lambda in [1.0, 4.0, 16.0, 64.0] {
            let q = p(lambda, 1.0);
            assert_eq!(exact_threshold_classify(&u, &q, &[1.0, 0.3]).unwrap(), 1);
            assert_eq!(exact_threshold_classify(&u, &q, &[1.0 + 1e-6, 0.3]).unwrap(), 0);
            assert_eq!(exact_threshold_classify(&u, &q, &[0.5, -1e-12]).unwrap(), 0);
        }
    }

    #[test]
    fn rtv_bound_examples() {
        let sq = BoxUnion::single(AxisBox::unit_cube(2).unwrap());
        assert_eq!(rtv_upper_bound(&sq, &p(1.0, 1.0)), 8.0);
        let b1 = rtv_upper_bound(&sq, &p(3.0, 1.0));
        let b2 = rtv_upper_bound(&sq, &p(6.0, 1.0));
        assert!(b2 < 4.0 * b1 && b2 > b1);
        let cube = BoxUnion::single(AxisBox::unit_cube(3).unwrap());
        assert_eq!(rtv_upper_bound(&cube, &p(1.0, 1.0)), 26.0);
    }

    #[test]
    fn calibration_zero_on_interior_sampler() {
        let u = BoxUnion::single(AxisBox::unit_cube(2).unwrap());
        let s = Sampler::Dirac { point: vec![0.4, 0.6] };
        let e = measure_calibration(&u, &p(2.0, 1.0), &s, 10_000, 0).unwrap();
        assert_eq!(e.mean, 0.0);
        assert!(measure_calibration(&u, &p(2.0, 1.0), &s, 100, 0).is_err());
    }
}
