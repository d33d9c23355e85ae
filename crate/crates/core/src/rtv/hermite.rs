use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::quad::integrate;

pub const HERMITE_MAX_ORDER: usize = 30;
/// Constant in the Gaussian-smoothing bound (the value the derivation supports).
pub const GAUSSIAN_BOUND_C: f64 = 2.2;
/// The tighter constant quoted alongside the theorem statement; kept for reference only.
pub const GAUSSIAN_BOUND_C_MAIN_TEXT: f64 = 1.2;

/// Probabilists' Hermite polynomial `He_n(u)`.
pub fn hermite(n: usize, u: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, u);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = u * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `∫ e^{−u²/2} |He_m(u)| du` with its error estimate.
///
/// Integrated on `|u| ≤ 40`; the neglected tails are bounded using
/// `|He_m(u)| ≤ 2 u^m` for `u ≥ 40 > m` and added to the error.
pub fn hermite_abs_moment_with_error(m: usize) -> Result<(f64, f64)> {
    if m > HERMITE_MAX_ORDER {
        return Err(Error::invalid("m", format!("order {m} exceeds {HERMITE_MAX_ORDER}")));
    }
    let q = integrate(|u| (-0.5 * u * u).exp() * hermite(m, u).abs(), 0.0, 40.0, 0.0, 1e-12, 4000)?;
    // On u ≥ 40 the log-derivative of u^m e^{−u²/2} is below −39, so each
    // tail is at most 2 · 40^m e^{−800} / 39.
    let tail = 2.0 * 2.0 * (40f64.ln() * m as f64 - 800.0).exp() / 39.0;
    Ok((2.0 * q.value, 2.0 * q.abs_error + tail))
}

pub fn hermite_abs_moment(m: usize) -> Result<f64> {
    Ok(hermite_abs_moment_with_error(m)?.0)
}

/// `C √d (√2 e / σ)^d Vol(A)` with `C` = [`GAUSSIAN_BOUND_C`].
pub fn gaussian_rtv_bound(d: usize, sigma: f64, volume: f64) -> Result<f64> {
    if d == 0 || !(sigma > 0.0) || !(volume >= 0.0) {
        return Err(Error::invalid("gaussian_rtv_bound", "need d >= 1, sigma > 0, volume >= 0"));
    }
    Ok(GAUSSIAN_BOUND_C * (d as f64).sqrt() * (2f64.sqrt() * E / sigma).powi(d as i32) * volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn base_cases() {
        assert_eq!(hermite(0, 0.3), 1.0);
        assert_eq!(hermite(1, 2.0), 2.0);
        assert_eq!(hermite(2, 3.0), 8.0);
        assert!((hermite(3, 1.5) - (1.5f64.powi(3) - 4.5)).abs() < 1e-14);
    }

    #[test]
    fn rodrigues_oracle() {
        // He_n(u) = (−1)^n e^{u²/2} dⁿ/duⁿ e^{−u²/2}. The fifth derivative is
        // taken with the Cauchy integral formula on a circle of radius r,
        // discretised by the trapezoidal rule (spectrally accurate).
        let (u, n, r, nodes) = (1.7, 5, 1.0, 64);
        let mut acc = 0.0;
        for k in 0..nodes {
            let th = 2.0 * PI * k as f64 / nodes as f64;
            let (a, b) = (u + r * th.cos(), r * th.sin());
            // e^{−z²/2} for z = a + ib
            let mag = (-(a * a - b * b) / 2.0).exp();
            let (re, im) = (mag * (-a * b).cos(), mag * (-a * b).sin());
            // real part of g(z) e^{−i n θ}
            let ph = -(n as f64) * th;
            acc += re * ph.cos() - im * ph.sin();
        }
        let d5 = 120.0 * acc / (nodes as f64 * r.powi(n));
        let rod = -(0.5 * u * u).exp() * d5;
        assert!((rod - hermite(5, u)).abs() < 1e-6, "{rod} vs {}", hermite(5, u));
    }

    #[test]
    fn moments() {
        assert!((hermite_abs_moment(0).unwrap() - (2.0 * PI).sqrt()).abs() < 1e-10);
        assert!((hermite_abs_moment(1).unwrap() - 2.0).abs() < 1e-10);
        // He_2 = u²−1 has antiderivative −u e^{−u²/2} against the weight.
        assert!((hermite_abs_moment(2).unwrap() - 4.0 * (-0.5f64).exp()).abs() < 1e-10);
        assert!(hermite_abs_moment(31).is_err());
        let mut fact = 1.0;
        for m in 0..=HERMITE_MAX_ORDER {
            if m > 0 {
                fact *= m as f64;
            }
            // m = 0 attains the bound, so compare within the certified quadrature error.
            let (v, err) = hermite_abs_moment_with_error(m).unwrap();
            assert!(v - err <= (2.0 * PI).sqrt() * fact.sqrt(), "m={m}: {v} vs {}", (2.0 * PI).sqrt() * fact.sqrt());
        }
    }

    #[test]
    fn bound_examples() {
        let s = 2f64.sqrt() * E;
        assert!((gaussian_rtv_bound(1, s, 1.0).unwrap() - GAUSSIAN_BOUND_C).abs() < 1e-12);
        let a = gaussian_rtv_bound(3, 0.5, 2.0).unwrap();
        let b = gaussian_rtv_bound(3, 0.25, 2.0).unwrap();
        assert!((b / a - 8.0).abs() < 1e-12);
        assert!(gaussian_rtv_bound(0, 1.0, 1.0).is_err());
    }
}
