use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real function of one variable, described either exactly (piecewise
/// linear) or by an evaluator plus the interval outside which it is affine.
#[derive(Clone)]
pub enum Scalar1DFunction {
    /// `slopes.len() == knots.len() + 1`; knots strictly increasing.
    PiecewiseLinear { knots: Vec<f64>, slopes: Vec<f64> },
    Smooth {
        eval: Evaluator,
        /// `f''` vanishes (numerically) outside this interval.
        support: (f64, f64),
        /// `(f'(−∞), f'(+∞))`; estimated at the support ends when `None`.
        tail_slopes: Option<(f64, f64)>,
    },
}

impl fmt::Debug for Scalar1DFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar1DFunction::PiecewiseLinear { knots, slopes } => {
                f.debug_struct("PiecewiseLinear").field("knots", knots).field("slopes", slopes).finish()
            }
            Scalar1DFunction::Smooth { support, tail_slopes, .. } => f
                .debug_struct("Smooth")
                .field("support", support)
                .field("tail_slopes", tail_slopes)
                .finish_non_exhaustive(),
        }
    }
}

impl Scalar1DFunction {
    pub fn piecewise_linear(knots: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != knots.len() + 1 {
            return Err(Error::invalid("slopes", "need exactly one more slope than knots"));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("knots", "must be strictly increasing"));
        }
        Ok(Scalar1DFunction::PiecewiseLinear { knots, slopes })
    }

    pub fn smooth<F>(f: F, support: (f64, f64), tail_slopes: Option<(f64, f64)>) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(support.0 < support.1 && support.0.is_finite() && support.1.is_finite()) {
            return Err(Error::invalid("support", "need a finite interval a < b"));
        }
        Ok(Scalar1DFunction::Smooth { eval: Arc::new(f), support, tail_slopes })
    }

    /// `c · f`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Scalar1DFunction::PiecewiseLinear { knots, slopes } => Scalar1DFunction::PiecewiseLinear {
                knots: knots.clone(),
                slopes: slopes.iter().map(|s| c * s).collect(),
            },
            Scalar1DFunction::Smooth { eval, support, tail_slopes } => {
                let inner = Arc::clone(eval);
                Scalar1DFunction::Smooth {
                    eval: Arc::new(move |x| c * inner(x)),
                    support: *support,
                    tail_slopes: tail_slopes.map(|(a, b)| (c * a, c * b)),
                }
            }
        }
    }

    /// Evaluates the function; piecewise-linear descriptors are anchored at `f(knots[0]) = 0`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Scalar1DFunction::Smooth { eval, .. } => eval(x),
            Scalar1DFunction::PiecewiseLinear { knots, slopes } => {
                if knots.is_empty() {
                    return slopes[0] * x;
                }
                if x <= knots[0] {
                    return slopes[0] * (x - knots[0]);
                }
                let mut acc = 0.0;
                for i in 0..knots.len() {
                    let right = knots.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    let seg_end = x.min(right);
                    acc += slopes[i + 1] * (seg_end - knots[i]);
                    if x <= right {
                        break;
                    }
                }
                acc
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rtv1dConfig {
    /// Grid cells across the support on the first pass.
    pub initial_cells: usize,
    /// Successive halvings allowed before giving up.
    pub max_refinements: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for Rtv1dConfig {
    fn default() -> Self {
        Rtv1dConfig { initial_cells: 1024, max_refinements: 9, rel_tol: 1e-6, abs_tol: 1e-12 }
    }
}

/// `max(∫|f''|, |f'(∞) + f'(−∞)|)` with its two ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rtv1d {
    pub value: f64,
    pub curvature: f64,
    pub tail_term: f64,
    /// Grid step of the accepted pass; 0 for exact descriptors.
    pub step: f64,
}

/// Discrete `∫|f''|` on a uniform grid: `Σ |f(x+h) − 2f(x) + f(x−h)| / h`.
///
/// Equals the total variation of the grid slopes, so kinks contribute their
/// exact slope jump once the grid resolves them. Also returns a bound on the
/// rounding noise of the sum, which grows like `cells / h`.
pub(crate) fn grid_curvature<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cells: usize) -> (f64, f64) {
    let h = (b - a) / cells as f64;
    let vals: Vec<f64> = (0..=cells + 2).map(|i| f(a + (i as f64 - 1.0) * h)).collect();
    let (mut sum, mut scale) = (0.0, 0.0);
    for w in vals.windows(3) {
        sum += (w[2] - 2.0 * w[1] + w[0]).abs();
        scale += w[2].abs() + 2.0 * w[1].abs() + w[0].abs();
    }
    (sum / h, 4.0 * f64::EPSILON * scale / h)
}

/// Radon total variation of a function of one variable.
///
/// Exact for piecewise-linear descriptors. For evaluators the curvature
/// integral is refined by grid halving until successive passes agree to
/// `rel_tol`; a jump discontinuity makes the passes grow like `1/h` and is
/// reported as [`Error::NonConvergence`].
pub fn rtv_1d(f: &Scalar1DFunction, cfg: &Rtv1dConfig) -> Result<Rtv1d> {
    match f {
        Scalar1DFunction::PiecewiseLinear { slopes, .. } => {
            let curvature: f64 = slopes.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
            let tail_term = (slopes[0] + slopes[slopes.len() - 1]).abs();
            Ok(Rtv1d { value: curvature.max(tail_term), curvature, tail_term, step: 0.0 })
        }
        Scalar1DFunction::Smooth { eval, support, tail_slopes } => {
            let (a, b) = *support;
            let mut cells = cfg.initial_cells.max(8);
            let mut prev = grid_curvature(|x| eval(x), a, b, cells).0;
            for _ in 0..cfg.max_refinements {
                cells *= 2;
                let (cur, noise) = grid_curvature(|x| eval(x), a, b, cells);
                if !cur.is_finite() {
                    return Err(Error::NonConvergence("curvature integral is not finite".into()));
                }
                if (cur - prev).abs() <= cfg.abs_tol.max(cfg.rel_tol * cur.abs()).max(2.0 * noise) {
                    let h = (b - a) / cells as f64;
                    let (lo, hi) = tail_slopes.unwrap_or_else(|| {
                        ((eval(a) - eval(a - h)) / h, (eval(b + h) - eval(b)) / h)
                    });
                    let tail_term = (lo + hi).abs();
                    return Ok(Rtv1d { value: cur.max(tail_term), curvature: cur, tail_term, step: h });
                }
                prev = cur;
            }
            Err(Error::NonConvergence(format!(
                "∫|f''| still changing after {} refinements (last value {prev:.6e}); f may be discontinuous",
                cfg.max_refinements
            )))
        }
    }
}
