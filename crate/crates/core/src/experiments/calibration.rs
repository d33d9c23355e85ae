use serde::{Deserialize, Serialize};

use crate::barrier::{measure_calibration, rtv_upper_bound, BarrierParams};
use crate::error::{Error, Result};
use crate::fit::{log_log_fit, LineFit};
use crate::fmt9;
use crate::geometry::BoxUnion;
use crate::mc::{McEstimate, Sampler};
use crate::rng::derive_seed;

/// Calibration error `E|S − 1_B|` and the skeleton RTV bound along a λ ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSweep {
    pub c0: f64,
    pub lambdas: Vec<f64>,
    pub calibration: Vec<McEstimate>,
    pub rtv_bound: Vec<f64>,
    /// Log-log fit of calibration against λ; absent when some value is zero.
    pub fit: Option<LineFit>,
}

/// Geometric ladder `start · ratio^k`, `k = 0..count`.
pub fn geometric_ladder(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * ratio.powi(k as i32)).collect()
}

/// Measures calibration at each λ with `n` samples (seed derived per rung)
/// and evaluates the RTV upper bound there.
pub fn barrier_sweep(
    union: &BoxUnion,
    lambdas: &[f64],
    c0: f64,
    sampler: &Sampler,
    n: usize,
    seed: u64,
) -> Result<BarrierSweep> {
    if lambdas.len() < 5 {
        return Err(Error::invalid("lambdas", "need a geometric ladder of at least 5 points"));
    }
    let ratio = lambdas[1] / lambdas[0];
    let geometric = ratio > 1.0 && lambdas.windows(2).all(|w| ((w[1] / w[0]) / ratio - 1.0).abs() < 1e-9);
    if !geometric {
        return Err(Error::invalid("lambdas", "must be an increasing geometric ladder"));
    }
    let mut calibration = Vec::with_capacity(lambdas.len());
    let mut rtv_bound = Vec::with_capacity(lambdas.len());
    for (k, &lambda) in lambdas.iter().enumerate() {
        let p = BarrierParams::new(lambda, c0)?;
        calibration.push(measure_calibration(union, &p, sampler, n, derive_seed(seed, k as u64))?);
        rtv_bound.push(rtv_upper_bound(union, &p));
    }
    let means: Vec<f64> = calibration.iter().map(|c| c.mean).collect();
    let fit = if means.iter().all(|m| *m > 0.0) { Some(log_log_fit(lambdas, &means)?) } else { None };
    Ok(BarrierSweep { c0, lambdas: lambdas.to_vec(), calibration, rtv_bound, fit })
}

impl BarrierSweep {
    /// Rows `lambda,calibration,stderr,rtv_bound`.
    pub fn to_csv(&self) -> Result<String> {
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(["lambda", "calibration", "stderr", "rtv_bound"])?;
        for ((l, c), b) in self.lambdas.iter().zip(&self.calibration).zip(&self.rtv_bound) {
            wr.write_record([fmt9(*l), fmt9(c.mean), fmt9(c.stderr), fmt9(*b)])?;
        }
        let bytes = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn header_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "c0": self.c0,
            "slope": self.fit.map(|f| f.slope),
            "intercept": self.fit.map(|f| f.intercept),
            "samples_per_lambda": self.calibration.first().map(|c| c.n),
        }))?)
    }
}
