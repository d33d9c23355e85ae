use std::io::Write;

use serde::{Deserialize, Serialize};

use super::one_d::{rtv_1d, Rtv1dConfig, Scalar1DFunction};
use crate::error::{Error, Result};
use crate::fit::log_log_fit;
use crate::quad::normal_cdf;

/// Measured functional across decreasing scales (mollifier widths or shell radii).
///
/// `diverges` is the verdict of the study's own criterion; a divergent
/// quantity is never written as a float infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceStudy {
    pub kind: String,
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Log-log slope of `values` against `scales`; `None` when some value is not positive.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub diverges: bool,
    pub criterion: String,
}

/// JSON header accompanying the CSV rows.
#[derive(Debug, Clone, Serialize)]
struct StudyHeader<'a> {
    kind: &'a str,
    slope: Option<f64>,
    intercept: Option<f64>,
    diverges: bool,
    criterion: &'a str,
}

pub(crate) fn check_scales(scales: &[f64]) -> Result<()> {
    if scales.len() < 4 {
        return Err(Error::invalid("scales", format!("need at least 4 scales, got {}", scales.len())));
    }
    if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) || scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("scales", "must be positive and strictly decreasing"));
    }
    Ok(())
}

impl DivergenceStudy {
    pub(crate) fn from_values(
        kind: &str,
        scales: Vec<f64>,
        values: Vec<f64>,
        stderr: Vec<f64>,
        diverges: impl FnOnce(Option<f64>, &[f64]) -> bool,
        criterion: &str,
    ) -> Self {
        let fit = if values.iter().all(|v| *v > 0.0) { log_log_fit(&scales, &values).ok() } else { None };
        let slope = fit.map(|f| f.slope);
        let verdict = diverges(slope, &values);
        DivergenceStudy {
            kind: kind.to_string(),
            scales,
            values,
            stderr,
            slope,
            intercept: fit.map(|f| f.intercept),
            diverges: verdict,
            criterion: criterion.to_string(),
        }
    }

    pub fn header_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StudyHeader {
            kind: &self.kind,
            slope: self.slope,
            intercept: self.intercept,
            diverges: self.diverges,
            criterion: &self.criterion,
        })?)
    }

    /// Rows `scale_or_shell,functional_value,stderr`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["scale_or_shell", "functional_value", "stderr"])?;
        for ((s, v), e) in self.scales.iter().zip(&self.values).zip(&self.stderr) {
            wr.write_record([format!("{s:.9e}"), format!("{v:.9e}"), format!("{e:.9e}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// A jump of height `height` at `location`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub location: f64,
    pub height: f64,
}

/// `∫|(f ⋆ G_ε)''|` for a step function `f` across mollifier scales `ε`.
///
/// The mollified function is `Σ c_i Φ((x − z_i)/ε)`; its curvature integral
/// grows like `1/ε`, and the study flags divergence when the fitted slope is
/// at most −0.9.
pub fn rtv_1d_step_divergence(jumps: &[Jump], scales: &[f64]) -> Result<DivergenceStudy> {
    check_scales(scales)?;
    if jumps.iter().any(|j| !(j.location.is_finite() && j.height.is_finite())) {
        return Err(Error::invalid("jumps", "locations and heights must be finite"));
    }
    let cfg = Rtv1dConfig::default();
    let mut values = Vec::with_capacity(scales.len());
    for &eps in scales {
        if jumps.iter().all(|j| j.height == 0.0) {
            values.push(0.0);
            continue;
        }
        let js = jumps.to_vec();
        let lo = js.iter().map(|j| j.location).fold(f64::INFINITY, f64::min) - 12.0 * eps;
        let hi = js.iter().map(|j| j.location).fold(f64::NEG_INFINITY, f64::max) + 12.0 * eps;
        let f = Scalar1DFunction::smooth(
            move |x| js.iter().map(|j| j.height * normal_cdf((x - j.location) / eps)).sum(),
            (lo, hi),
            Some((0.0, 0.0)),
        )?;
        values.push(rtv_1d(&f, &cfg)?.curvature);
    }
    let n = scales.len();
    Ok(DivergenceStudy::from_values(
        "step_mollification",
        scales.to_vec(),
        values,
        vec![0.0; n],
        |slope, _| slope.is_some_and(|s| s <= -0.9),
        "fitted log-log slope <= -0.9",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const SCALES: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

    #[test]
    fn unit_step_slope() {
        let s = rtv_1d_step_divergence(&[Jump { location: 0.0, height: 1.0 }], &SCALES).unwrap();
        for (e, v) in s.scales.iter().zip(&s.values) {
            let oracle = 2.0 / (e * (2.0 * PI).sqrt());
            assert!((v - oracle).abs() < 1e-5 * oracle);
        }
        assert!((s.slope.unwrap() + 1.0).abs() < 0.05);
        assert!(s.diverges);
    }

    #[test]
    fn two_jumps_and_none() {
        let one = rtv_1d_step_divergence(&[Jump { location: 0.0, height: 1.0 }], &SCALES).unwrap();
        let two = rtv_1d_step_divergence(
            &[Jump { location: 0.0, height: 1.0 }, Jump { location: 5.0, height: 1.0 }],
            &SCALES,
        )
        .unwrap();
        for (a, b) in one.values.iter().zip(&two.values) {
            assert!((b - 2.0 * a).abs() < 1e-5 * b);
        }
        let none = rtv_1d_step_divergence(&[], &SCALES).unwrap();
        assert!(none.values.iter().all(|v| *v == 0.0));
        assert_eq!(none.slope, None);
        assert!(!none.diverges);
    }

    #[test]
    fn scale_validation() {
        let j = [Jump { location: 0.0, height: 1.0 }];
        assert!(rtv_1d_step_divergence(&j, &[0.1, 0.05, 0.025]).is_err());
        assert!(rtv_1d_step_divergence(&j, &[0.1, 0.05, 0.05, 0.01]).is_err());
    }

    #[test]
    fn csv_and_header() {
        let s = rtv_1d_step_divergence(&[Jump { location: 0.0, height: 1.0 }], &SCALES).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scale_or_shell,functional_value,stderr\n"));
        assert_eq!(text.lines().count(), 5);
        let h: serde_json::Value = serde_json::from_str(&s.header_json().unwrap()).unwrap();
        assert!(h["slope"].as_f64().unwrap() < -0.9);
    }
}
