//! Ready-made one-dimensional comparisons between the exact formula, the
//! slice estimator and the analytic bounds.

use serde::{Deserialize, Serialize};

use super::hermite::gaussian_rtv_bound;
use super::numeric::{rtv_numeric_odd_d, RtvEstimate, RtvNumericConfig};
use super::one_d::{rtv_1d, Rtv1dConfig, Scalar1DFunction};
use crate::barrier::{rtv_upper_bound, score_box, BarrierParams};
use crate::error::{Error, Result};
use crate::geometry::{AxisBox, BoxUnion};
use crate::smoothing::eval_gaussian_box;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBoundCheck {
    pub sigma: f64,
    pub numeric: RtvEstimate,
    pub bound: f64,
    pub holds: bool,
}

fn interval(b: &AxisBox) -> Result<(f64, f64)> {
    if b.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: b.dim() });
    }
    Ok((b.lower()[0], b.upper()[0]))
}

/// Slice estimate of the Gaussian-smoothed interval against the analytic bound.
pub fn gaussian_bound_check(b: &AxisBox, sigma: f64) -> Result<GaussianBoundCheck> {
    let (lo, hi) = interval(b)?;
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    let union = BoxUnion::single(b.clone());
    let cfg = RtvNumericConfig {
        t_min: lo - 12.0 * sigma,
        t_max: hi + 12.0 * sigma,
        t_step: sigma / 20.0,
        ..Default::default()
    };
    let numeric = rtv_numeric_odd_d(|x| eval_gaussian_box(&union, sigma, x).unwrap_or(f64::NAN), 1, &cfg)?;
    let bound = gaussian_rtv_bound(1, sigma, b.volume())?;
    Ok(GaussianBoundCheck { sigma, holds: numeric.value <= bound, numeric, bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierRtv1d {
    pub lambda: f64,
    pub c0: f64,
    pub rtv_1d: f64,
    pub rtv_numeric: f64,
    pub upper_bound: f64,
}

/// Barrier score of an interval: exact 1-D value, slice estimate, and the skeleton bound.
pub fn barrier_rtv_1d(b: &AxisBox, p: &BarrierParams) -> Result<BarrierRtv1d> {
    let (lo, hi) = interval(b)?;
    // e^{−λ t} falls below 1e−17 beyond 40/λ from the interval.
    let pad = 40.0 / p.lambda();
    let support = (lo - pad, hi + pad);
    let bx = b.clone();
    let pp = *p;
    let f = Scalar1DFunction::smooth(move |x| score_box(&bx, &pp, &[x]).unwrap_or(f64::NAN), support, Some((0.0, 0.0)))?;
    let exact = rtv_1d(&f, &Rtv1dConfig::default())?;
    let cfg = RtvNumericConfig {
        t_min: support.0,
        t_max: support.1,
        t_step: p.epsilon() / 40.0,
        ..Default::default()
    };
    let numeric = rtv_numeric_odd_d(|x| score_box(b, p, x).unwrap_or(f64::NAN), 1, &cfg)?;
    Ok(BarrierRtv1d {
        lambda: p.lambda(),
        c0: p.c0(),
        rtv_1d: exact.value,
        rtv_numeric: numeric.value,
        upper_bound: rtv_upper_bound(&BoxUnion::single(b.clone()), p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_interval() {
        let b = AxisBox::new(vec![0.0], vec![10.0]).unwrap();
        let c = gaussian_bound_check(&b, 0.5).unwrap();
        let exact = 4.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((c.numeric.value / exact - 1.0).abs() < 5e-3, "{}", c.numeric.value);
        assert!(c.holds);
    }

    #[test]
    fn barrier_agreement() {
        let b = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let r = barrier_rtv_1d(&b, &BarrierParams::new(4.0, 1.0).unwrap()).unwrap();
        assert!((r.rtv_numeric / r.rtv_1d - 1.0).abs() < 0.01, "{r:?}");
    }

    #[test]
    fn barrier_rtv_grows_linearly_in_lambda() {
        let b = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let r4 = barrier_rtv_1d(&b, &BarrierParams::new(4.0, 1.0).unwrap()).unwrap();
        let r16 = barrier_rtv_1d(&b, &BarrierParams::new(16.0, 1.0).unwrap()).unwrap();
        // Same shape rescaled by 1/λ, so the ratio to the skeleton bound is fixed.
        let k4 = r4.rtv_1d / r4.upper_bound;
        let k16 = r16.rtv_1d / r16.upper_bound;
        assert!((k16 / k4 - 1.0).abs() < 0.02, "{k4} {k16}");
    }
}
