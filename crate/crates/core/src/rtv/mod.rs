//! Radon total variation: exact 1-D values, a slice-based estimator for odd
//! dimensions, and the divergence diagnostics for hard and sigmoid trees.

mod checks;
mod divergence;
mod hermite;
mod numeric;
mod one_d;
mod radon;
mod sigmoid;

pub use checks::{barrier_rtv_1d, gaussian_bound_check, BarrierRtv1d, GaussianBoundCheck};
pub use divergence::{rtv_1d_step_divergence, DivergenceStudy, Jump};
pub use hermite::{
    gaussian_rtv_bound, hermite, hermite_abs_moment, hermite_abs_moment_with_error, GAUSSIAN_BOUND_C, GAUSSIAN_BOUND_C_MAIN_TEXT,
    HERMITE_MAX_ORDER,
};
pub use numeric::{rtv_numeric_odd_d, RtvEstimate, RtvNumericConfig};
pub use one_d::{rtv_1d, Rtv1d, Rtv1dConfig, Scalar1DFunction};
pub use radon::{radon_transform, RadonSliceGrid};
pub use sigmoid::{sigmoid_divergence_study, sigmoid_integrand, ShellMetric, SinhIntegrandSpec};

use std::f64::consts::PI;

/// Normalising constant `c_d = 1 / (2 (2π)^{d−1})` of the Radon-domain norm.
pub fn c_d(d: usize) -> f64 {
    1.0 / (2.0 * (2.0 * PI).powi(d as i32 - 1))
}

/// Surface measure of `S^{d−1}`; counting measure (2) for `d = 1`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            // |S^{d-1}| = 2π/(d-2) |S^{d-3}|
            2.0 * PI / (d as f64 - 2.0) * sphere_area(d - 2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert_eq!(c_d(1), 0.5);
        assert!((c_d(3) - 1.0 / (8.0 * PI * PI)).abs() < 1e-16);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }
}
