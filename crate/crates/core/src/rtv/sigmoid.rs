use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::c_d;
use super::divergence::{check_scales, DivergenceStudy};
use crate::error::{Error, Result};
use crate::quad::integrate;

/// Sigmoid tree leaf with orthonormal split normals `w_1..w_D` in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinhIntegrandSpec {
    pub gamma: f64,
    pub splits: Vec<Vec<f64>>,
    pub dim: usize,
    /// Project `β` onto the span of the splits instead of rejecting it.
    #[serde(default)]
    pub project: bool,
}

/// How the distance of `β` from the equator `w_1·β = 0` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellMetric {
    /// Angular distance: `arcsin|λ_1| ∈ [δ, 2δ]`.
    #[default]
    Geodesic,
    /// Coordinate distance: `|λ_1| ∈ [δ, 2δ]`.
    Projection,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SinhIntegrandSpec {
    pub fn new(gamma: f64, splits: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        let s = SinhIntegrandSpec { gamma, splits, dim, project: false };
        s.validate()?;
        Ok(s)
    }

    pub fn depth(&self) -> usize {
        self.splits.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        if self.splits.is_empty() || self.splits.len() > self.dim {
            return Err(Error::invalid("splits", format!("need 1..={} splits", self.dim)));
        }
        for (i, w) in self.splits.iter().enumerate() {
            if w.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: w.len() });
            }
            for (j, v) in self.splits.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(w, v) - target).abs() > 1e-10 {
                    return Err(Error::invalid("splits", "split normals must be orthonormal"));
                }
            }
        }
        Ok(())
    }

    /// `c_d / √(2π) · (2π)^{−(d−D)/2} · (γπ)^D`.
    fn prefactor(&self) -> f64 {
        let d = self.dim as f64;
        let dd = self.depth() as f64;
        c_d(self.dim) / (2.0 * PI).sqrt() * (2.0 * PI).powf(-(d - dd) / 2.0) * (self.gamma * PI).powf(dd)
    }

    /// `λ_i(β) = w_i·β`, after checking (or projecting) `β` into the span.
    fn lambdas(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: beta.len() });
        }
        let mut lam: Vec<f64> = self.splits.iter().map(|w| dot(w, beta)).collect();
        let in_span = lam.iter().map(|l| l * l).sum::<f64>();
        let total = dot(beta, beta);
        if (total - in_span).abs() > 1e-10 {
            if !self.project {
                return Err(Error::invalid("beta", "direction is not in the span of the splits"));
            }
            let n = in_span.sqrt();
            if n == 0.0 {
                return Err(Error::Singular("direction is orthogonal to every split".into()));
            }
            lam.iter_mut().for_each(|l| *l /= n);
        }
        Ok(lam)
    }
}

/// `ln|sinh z|` without overflow or cancellation.
fn ln_abs_sinh(z: f64) -> f64 {
    let a = z.abs();
    a + (-(-2.0 * a).exp_m1()).ln() - std::f64::consts::LN_2
}

fn integrand_from_lambdas(pre: f64, gamma: f64, d: usize, lam: &[f64], omega: f64) -> f64 {
    let a = omega.abs();
    let ln_den: f64 = lam.iter().map(|l| ln_abs_sinh(PI * gamma * l * omega)).sum();
    pre * ((d as f64 + 1.0) * a.ln() - ln_den).exp()
}

/// `c_d/√(2π) (2π)^{−(d−D)/2} (γπ)^D |ω|^{d+1} ∏ 1/|sinh(πγ λ_i(β) ω)|`.
///
/// Fails with [`Error::Singular`] on the equator `λ_i(β) = 0`, where the
/// integrand is infinite for every `ω`.
pub fn sigmoid_integrand(spec: &SinhIntegrandSpec, beta: &[f64], omega: f64) -> Result<f64> {
    spec.validate()?;
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::invalid("omega", "must be finite and nonzero"));
    }
    let lam = spec.lambdas(beta)?;
    if let Some(i) = lam.iter().position(|l| *l == 0.0) {
        return Err(Error::Singular(format!("lambda_{} vanishes: beta lies on an equator", i + 1)));
    }
    Ok(integrand_from_lambdas(spec.prefactor(), spec.gamma, spec.dim, &lam, omega))
}

/// `∫_R` of the integrand over `ω` for fixed `λ`.
fn omega_integral(pre: f64, gamma: f64, d: usize, lam: &[f64]) -> Result<(f64, f64)> {
    let rate: f64 = lam.iter().map(|l| PI * gamma * l.abs()).sum();
    let upper = 80.0 / rate;
    let q = integrate(|w| integrand_from_lambdas(pre, gamma, d, lam, w), 0.0, upper, 0.0, 1e-11, 2000)?;
    Ok((2.0 * q.value, 2.0 * q.abs_error))
}

/// Mass of the integrand on dyadic shells approaching the equator `w_1·β = 0`.
///
/// Supported for `D = d = 2`, where the shell is parametrised by the angle
/// `α` of `β` from the equator (`λ_1 = sin α`, `λ_2 = cos α`) and the four
/// symmetric arcs are summed. A per-shell mass that does not decay as `δ → 0`
/// means the sphere integral diverges at least logarithmically; the study
/// flags divergence when the masses are nondecreasing.
pub fn sigmoid_divergence_study(
    spec: &SinhIntegrandSpec,
    shells: &[f64],
    metric: ShellMetric,
) -> Result<DivergenceStudy> {
    spec.validate()?;
    if spec.depth() == 1 {
        return Err(Error::FiniteCase(
            "a single sigmoid split has bounded Radon total variation; no equator divergence to study".into(),
        ));
    }
    if spec.dim != 2 || spec.depth() != 2 {
        return Err(Error::Unsupported(format!(
            "shell study implemented for D = d = 2, got D = {}, d = {}",
            spec.depth(),
            spec.dim
        )));
    }
    check_scales(shells)?;
    let limit = match metric {
        ShellMetric::Geodesic => PI / 2.0,
        ShellMetric::Projection => 1.0,
    };
    if 2.0 * shells[0] >= limit {
        return Err(Error::invalid("shells", "outer shell 2*delta must stay below the pole"));
    }
    let pre = spec.prefactor();
    let gamma = spec.gamma;
    let rows: Vec<(f64, f64)> = shells
        .par_iter()
        .map(|&delta| -> Result<(f64, f64)> {
            let (lo, hi) = match metric {
                ShellMetric::Geodesic => (delta, 2.0 * delta),
                ShellMetric::Projection => (delta.asin(), (2.0 * delta).asin()),
            };
            let q = integrate(
                |alpha| omega_integral(pre, gamma, 2, &[alpha.sin(), alpha.cos()]).map_or(f64::NAN, |r| r.0),
                lo,
                hi,
                0.0,
                1e-10,
                500,
            )?;
            Ok((4.0 * q.value, 4.0 * q.abs_error))
        })
        .collect::<Result<_>>()?;
    let (values, stderr): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    Ok(DivergenceStudy::from_values(
        match metric {
            ShellMetric::Geodesic => "sigmoid_equator_shells_geodesic",
            ShellMetric::Projection => "sigmoid_equator_shells_projection",
        },
        shells.to_vec(),
        values,
        stderr,
        |_, v| v.windows(2).all(|w| w[1] >= w[0]),
        "per-shell mass nondecreasing as shells approach the equator",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec2(gamma: f64) -> SinhIntegrandSpec {
        SinhIntegrandSpec::new(gamma, vec![vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap()
    }

    #[test]
    fn small_omega_single_split() {
        let d = 3;
        let gamma = 0.7;
        let s = SinhIntegrandSpec::new(gamma, vec![vec![1.0, 0.0, 0.0]], d).unwrap();
        let pre = s.prefactor();
        for w in [1e-3, 1e-5] {
            let v = sigmoid_integrand(&s, &[1.0, 0.0, 0.0], w).unwrap();
            let leading = pre * w.powi(d as i32) / (PI * gamma);
            assert!((v / leading - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn equator_and_tail() {
        let s = spec2(1.0);
        assert!(matches!(sigmoid_integrand(&s, &[1.0, 0.0], 0.5), Err(Error::Singular(_))));
        let near = sigmoid_integrand(&s, &[(1.0f64 - 1e-12).sqrt(), 1e-6], 0.5).unwrap();
        let mid = sigmoid_integrand(&s, &[0.8, 0.6], 0.5).unwrap();
        assert!(near > 1e4 * mid);
        let b = [0.8, 0.6];
        for w in [5.0, 20.0, 200.0] {
            let v = sigmoid_integrand(&s, &b, w).unwrap();
            // 1/sinh z = 2e^{−z} / (1 − e^{−2z})
            let correction = (1.0 - (-2.0 * PI * w * 0.6).exp()).powi(-2);
            let bound = s.prefactor() * w.powi(3) * 4.0 * (-PI * w * 1.4).exp() * correction;
            assert!(v <= bound * (1.0 + 1e-12), "{v} {bound}");
        }
        assert!(sigmoid_integrand(&s, &b, 1e3).unwrap() < 1e-300);
    }

    #[test]
    fn span_check() {
        let s = SinhIntegrandSpec::new(1.0, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], 3).unwrap();
        assert!(sigmoid_integrand(&s, &[0.0, 0.6, 0.8], 1.0).is_err());
        let p = SinhIntegrandSpec { project: true, ..s };
        let a = sigmoid_integrand(&p, &[0.0, 0.6, 0.8], 1.0);
        assert!(matches!(a, Err(Error::Singular(_))));
        assert!(SinhIntegrandSpec::new(1.0, vec![vec![1.0, 0.0], vec![0.6, 0.8]], 2).is_err());
    }

    #[test]
    fn shells_do_not_decay() {
        let shells = [0.1, 0.05, 0.025, 0.0125];
        let s = sigmoid_divergence_study(&spec2(1.0), &shells, ShellMetric::Geodesic).unwrap();
        assert!(s.diverges, "{:?}", s.values);
        let p = sigmoid_divergence_study(&spec2(1.0), &shells, ShellMetric::Projection).unwrap();
        for (a, b) in s.values.iter().zip(&p.values) {
            assert!(*b > 0.9 * a);
        }
        let last = p.values.len() - 1;
        assert!((p.values[last] / s.values[last] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gamma_rescaling() {
        // ω → ω/γ turns the ω-integral into γ^{−(d+2)} times a γ-free one, and
        // the prefactor carries γ^D, so masses scale as γ^{D−d−2}.
        let shells = [0.1, 0.05, 0.025, 0.0125];
        let a = sigmoid_divergence_study(&spec2(0.5), &shells, ShellMetric::Geodesic).unwrap();
        let b = sigmoid_divergence_study(&spec2(1.0), &shells, ShellMetric::Geodesic).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x / y - 4.0).abs() < 1e-6, "{x} {y}");
        }
    }

    #[test]
    fn single_split_is_finite_case() {
        let s = SinhIntegrandSpec::new(1.0, vec![vec![1.0, 0.0]], 2).unwrap();
        let r = sigmoid_divergence_study(&s, &[0.1, 0.05, 0.025, 0.0125], ShellMetric::Geodesic);
        assert!(matches!(r, Err(Error::FiniteCase(_))));
    }
}
