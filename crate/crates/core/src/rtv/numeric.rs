use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::radon::{radon_transform, RadonSliceGrid};
use super::{c_d, sphere_area};
use crate::error::{Error, Result};
use crate::rng::derived_rng;

/// Normalisation used by [`rtv_numeric_odd_d`], echoed into results.
pub const NORMALIZATION: &str =
    "c_d * |S^{d-1}| * mean_beta int |d_t^{d+1} R f(beta,t)| dt, c_d = 1/(2 (2 pi)^{d-1}); for d = 1 this is int |f''|";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtvNumericConfig {
    /// Sphere directions for `d = 3`. For `d = 1` only `β = +1` is evaluated,
    /// since `R f(-β, t) = R f(β, -t)` carries the same mass.
    pub directions: usize,
    pub seed: u64,
    /// `d = 1` samples `t` on `[t_min, t_max]`. For `d = 3` the window is widened to
    /// `[-T, T]`, `T = max(|t_min|, |t_max|)`, so every direction sees the support.
    /// `R f` must be flat near both ends.
    pub t_min: f64,
    pub t_max: f64,
    /// Initial finite-difference step in `t`.
    pub t_step: f64,
    pub max_refinements: usize,
    /// Accept once halving the step moves the estimate by less than this fraction.
    pub rel_tol: f64,
    pub tangential_points: usize,
    pub half_width: f64,
}

impl Default for RtvNumericConfig {
    fn default() -> Self {
        RtvNumericConfig {
            directions: 256,
            seed: 0,
            t_min: -2.0,
            t_max: 2.0,
            t_step: 0.02,
            max_refinements: 4,
            rel_tol: 0.02,
            tangential_points: 96,
            half_width: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtvEstimate {
    pub value: f64,
    pub stderr: f64,
    pub directions: usize,
    /// Finite-difference step of the accepted pass.
    pub t_step: f64,
    pub normalization: String,
}

fn binomial_row(k: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..k {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row
}

/// `∫ |∂_t^k g| dt` from samples of `g` with spacing `h`, using the central
/// `k`-th difference (k even, `k + 1` nodes) and taking every `stride`-th sample.
fn fd_abs_integral(values: &[f64], h: f64, k: usize, stride: usize) -> f64 {
    let coeffs: Vec<f64> = binomial_row(k)
        .into_iter()
        .enumerate()
        .map(|(i, c)| if (k - i) % 2 == 0 { c } else { -c })
        .collect();
    let sub: Vec<f64> = values.iter().step_by(stride).copied().collect();
    let step = h * stride as f64;
    let scale = step.powi(k as i32);
    sub.windows(k + 1)
        .map(|w| w.iter().zip(&coeffs).map(|(v, c)| v * c).sum::<f64>().abs())
        .sum::<f64>()
        * step
        / scale
}

fn sphere_directions(d: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    if d == 1 {
        return vec![vec![1.0]];
    }
    (0..m)
        .map(|i| {
            let mut rng = derived_rng(seed, i as u64);
            loop {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 1e-12 {
                    let mut u: Vec<f64> = v.iter().map(|x| x / n).collect();
                    // Renormalise so the unit-vector check passes at 1e-12.
                    let n2 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    u.iter_mut().for_each(|x| *x /= n2);
                    return u;
                }
            }
        })
        .collect()
}

/// Radon-domain total variation of a smooth function on `R^d`, `d ∈ {1, 3}`.
///
/// For odd `d` the norm is `c_d ∫∫ |∂_t^{d+1} R f(β,t)| dt dβ`. Each
/// direction's slice is differentiated with a central stencil; the step is
/// halved until the estimate at `h` and `2h` agree within `rel_tol`. A
/// function that is not `C^{d+1}` never settles and yields
/// [`Error::NonConvergence`].
pub fn rtv_numeric_odd_d<F>(f: F, d: usize, cfg: &RtvNumericConfig) -> Result<RtvEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if d != 1 && d != 3 {
        return Err(Error::Unsupported(format!(
            "rtv_numeric_odd_d needs d in {{1,3}}; got {d} (even d needs a fractional operator)"
        )));
    }
    if d == 3 && cfg.directions < 2 {
        return Err(Error::invalid("directions", "need at least two sphere directions"));
    }
    if !(cfg.t_max > cfg.t_min) || !(cfg.t_step > 0.0) {
        return Err(Error::invalid("t_grid", "need t_min < t_max and a positive step"));
    }
    let k = d + 1;
    let dirs = sphere_directions(d, cfg.directions, cfg.seed);
    let (t_lo, t_hi) = if d == 1 {
        (cfg.t_min, cfg.t_max)
    } else {
        let t = cfg.t_min.abs().max(cfg.t_max.abs());
        (-t, t)
    };
    let mut h = cfg.t_step;
    let mut last = None;
    for _ in 0..=cfg.max_refinements {
        let count = ((t_hi - t_lo) / h).ceil() as usize + 1;
        let per_dir: Vec<(f64, f64)> = dirs
            .par_iter()
            .map(|beta| -> Result<(f64, f64)> {
                let grid = RadonSliceGrid::new(
                    beta.clone(),
                    t_lo,
                    h,
                    count,
                    cfg.tangential_points,
                    cfg.half_width,
                )?;
                let r = radon_transform(&f, &grid)?;
                Ok((fd_abs_integral(&r, h, k, 1), fd_abs_integral(&r, h, k, 2)))
            })
            .collect::<Result<_>>()?;
        let scale = c_d(d) * sphere_area(d);
        let m = per_dir.len() as f64;
        let fine = per_dir.iter().map(|p| p.0).sum::<f64>() / m;
        let coarse = per_dir.iter().map(|p| p.1).sum::<f64>() / m;
        if !fine.is_finite() {
            return Err(Error::NonConvergence("slice derivative integral is not finite".into()));
        }
        if (fine - coarse).abs() <= cfg.rel_tol * fine.abs() || fine.abs() < 1e-300 {
            let stderr = if d == 1 {
                0.0
            } else {
                let var = per_dir.iter().map(|p| (p.0 - fine).powi(2)).sum::<f64>() / (m - 1.0);
                scale * (var / m).sqrt()
            };
            return Ok(RtvEstimate {
                value: scale * fine,
                stderr,
                directions: per_dir.len(),
                t_step: h,
                normalization: NORMALIZATION.to_string(),
            });
        }
        last = Some((fine, coarse));
        h /= 2.0;
    }
    let (fine, coarse) = last.unwrap_or((f64::NAN, f64::NAN));
    Err(Error::NonConvergence(format!(
        "finite differences at h and 2h still differ ({fine:.6e} vs {coarse:.6e}); f is not smooth enough"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::normal_cdf;

    #[test]
    fn stencil_is_exact_on_polynomials() {
        let h = 0.1;
        let vals: Vec<f64> = (0..20).map(|i| (i as f64 * h).powi(4)).collect();
        // ∂⁴ t⁴ = 24 over 16 interior nodes of spacing h.
        let got = fd_abs_integral(&vals, h, 4, 1);
        assert!((got - 24.0 * 16.0 * h).abs() < 1e-6, "{got}");
    }

    #[test]
    fn d1_mollified_step() {
        let sigma = 0.2;
        let f = |x: &[f64]| normal_cdf(x[0] / sigma);
        let cfg = RtvNumericConfig { t_step: 0.01, ..Default::default() };
        let r = rtv_numeric_odd_d(f, 1, &cfg).unwrap();
        let exact = 2.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        assert!((r.value - exact).abs() < 1e-3 * exact, "{} vs {exact}", r.value);
    }

    #[test]
    fn hard_step_is_rejected() {
        let f = |x: &[f64]| if x[0] > 0.0 { 1.0 } else { 0.0 };
        let cfg = RtvNumericConfig { max_refinements: 3, ..Default::default() };
        assert!(matches!(rtv_numeric_odd_d(f, 1, &cfg), Err(Error::NonConvergence(_))));
    }

    #[test]
    fn even_d_rejected() {
        assert!(matches!(rtv_numeric_odd_d(|_| 0.0, 2, &RtvNumericConfig::default()), Err(Error::Unsupported(_))));
    }
}
