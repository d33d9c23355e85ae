use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where to evaluate `R f(β, ·)` and how to integrate over each hyperplane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadonSliceGrid {
    direction: Vec<f64>,
    t_start: f64,
    t_step: f64,
    t_count: usize,
    /// Midpoint nodes per tangential dimension.
    pub tangential_points: usize,
    /// The hyperplane is integrated over `[−L, L]^{d−1}` in tangential coordinates.
    pub half_width: f64,
    /// Largest tolerated `|f|` on the edge of the window, relative to the slice peak.
    pub edge_tol: f64,
}

impl RadonSliceGrid {
    pub fn new(
        direction: Vec<f64>,
        t_start: f64,
        t_step: f64,
        t_count: usize,
        tangential_points: usize,
        half_width: f64,
    ) -> Result<Self> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("direction", format!("must be a unit vector, norm is {norm}")));
        }
        if !(t_step > 0.0 && t_step.is_finite()) || t_count == 0 || !t_start.is_finite() {
            return Err(Error::invalid("t_grid", "need a positive step and at least one node"));
        }
        if tangential_points == 0 || !(half_width > 0.0) {
            return Err(Error::invalid("hyperplane", "need tangential nodes and a positive half width"));
        }
        Ok(RadonSliceGrid { direction, t_start, t_step, t_count, tangential_points, half_width, edge_tol: 1e-6 })
    }

    /// Uniform grid from `t_min` to `t_max` inclusive with `t_count ≥ 2` nodes.
    pub fn spanning(
        direction: Vec<f64>,
        t_min: f64,
        t_max: f64,
        t_count: usize,
        tangential_points: usize,
        half_width: f64,
    ) -> Result<Self> {
        if t_count < 2 || !(t_max > t_min) {
            return Err(Error::invalid("t_grid", "need t_min < t_max and at least two nodes"));
        }
        let step = (t_max - t_min) / (t_count - 1) as f64;
        Self::new(direction, t_min, step, t_count, tangential_points, half_width)
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn t_step(&self) -> f64 {
        self.t_step
    }

    pub fn t_values(&self) -> Vec<f64> {
        (0..self.t_count).map(|i| self.t_start + i as f64 * self.t_step).collect()
    }

    /// Orthonormal basis of the hyperplane `β^⊥`.
    fn tangent_basis(&self) -> Vec<Vec<f64>> {
        let b = &self.direction;
        match b.len() {
            2 => vec![vec![-b[1], b[0]]],
            3 => {
                // Gram-Schmidt against the axis least aligned with β.
                let k = (0..3)
                    .min_by(|&i, &j| b[i].abs().total_cmp(&b[j].abs()))
                    .unwrap_or(0);
                let mut u = [0.0; 3];
                u[k] = 1.0;
                let dot = u[k] * b[k];
                for i in 0..3 {
                    u[i] -= dot * b[i];
                }
                let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                let u = [u[0] / n, u[1] / n, u[2] / n];
                let v = [
                    b[1] * u[2] - b[2] * u[1],
                    b[2] * u[0] - b[0] * u[2],
                    b[0] * u[1] - b[1] * u[0],
                ];
                vec![u.to_vec(), v.to_vec()]
            }
            _ => Vec::new(),
        }
    }
}

/// `R f(β, t) = ∫_{β·x = t} f(x) ds(x)` on every node of the grid.
///
/// The hyperplane integral is a tensor midpoint rule over the tangential
/// window; for `d = 1` the "hyperplane" is the single point `x = β t`.
/// Fails if `f` is not negligible on the window edges, since the window then
/// truncates the support.
pub fn radon_transform<F>(f: F, grid: &RadonSliceGrid) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let d = grid.dim();
    let beta = grid.direction();
    let ts = grid.t_values();
    match d {
        1 => Ok(ts.iter().map(|&t| f(&[beta[0] * t])).collect()),
        2 | 3 => {
            let basis = grid.tangent_basis();
            let n = grid.tangential_points;
            let l = grid.half_width;
            let h = 2.0 * l / n as f64;
            let nodes: Vec<f64> = (0..n).map(|i| -l + (i as f64 + 0.5) * h).collect();
            let mut x = vec![0.0; d];
            let mut out = Vec::with_capacity(ts.len());
            let mut peak = 0.0f64;
            let mut edge = 0.0f64;
            for &t in &ts {
                let mut acc = 0.0;
                if d == 2 {
                    let u = &basis[0];
                    for &s in &nodes {
                        for k in 0..2 {
                            x[k] = t * beta[k] + s * u[k];
                        }
                        let v = f(&x);
                        peak = peak.max(v.abs());
                        acc += v;
                    }
                    for s in [-l, l] {
                        for k in 0..2 {
                            x[k] = t * beta[k] + s * u[k];
                        }
                        edge = edge.max(f(&x).abs());
                    }
                    acc *= h;
                } else {
                    let (u, v) = (&basis[0], &basis[1]);
                    for &s in &nodes {
                        for &r in &nodes {
                            for k in 0..3 {
                                x[k] = t * beta[k] + s * u[k] + r * v[k];
                            }
                            let val = f(&x);
                            peak = peak.max(val.abs());
                            acc += val;
                        }
                    }
                    for &s in &nodes {
                        for (a, b) in [(s, -l), (s, l), (-l, s), (l, s)] {
                            for k in 0..3 {
                                x[k] = t * beta[k] + a * u[k] + b * v[k];
                            }
                            edge = edge.max(f(&x).abs());
                        }
                    }
                    acc *= h * h;
                }
                out.push(acc);
            }
            if edge > grid.edge_tol * peak.max(f64::MIN_POSITIVE) {
                return Err(Error::invalid(
                    "half_width",
                    format!("window edge value {edge:.3e} is not negligible against peak {peak:.3e}; support is truncated"),
                ));
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported(format!("radon_transform supports d in {{1,2,3}}, got {d}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AxisBox, BoxUnion};
    use crate::quad::{integrate, normal_cdf};
    use crate::smoothing::eval_gaussian_box;

    fn disc(x: &[f64]) -> f64 {
        if x[0] * x[0] + x[1] * x[1] <= 1.0 {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn chord_length() {
        let a: f64 = 0.7;
        let g = RadonSliceGrid::new(vec![a.cos(), a.sin()], 0.0, 0.5, 3, 40_000, 2.0).unwrap();
        let r = radon_transform(disc, &g).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-3);
        assert!((r[1] - 2.0 * 0.75f64.sqrt()).abs() < 1e-3);
        let far = RadonSliceGrid::new(vec![1.0, 0.0], 1.5, 0.1, 2, 100, 2.0).unwrap();
        assert_eq!(radon_transform(disc, &far).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn gaussian_box_marginal() {
        let u = BoxUnion::single(AxisBox::new(vec![0.0, 0.2], vec![1.0, 0.7]).unwrap());
        let sigma = 0.1;
        let g = RadonSliceGrid::new(vec![1.0, 0.0], -0.3, 0.1, 17, 400, 2.0).unwrap();
        let r = radon_transform(|x| eval_gaussian_box(&u, sigma, x).unwrap(), &g).unwrap();
        for (t, v) in g.t_values().into_iter().zip(r) {
            let first = normal_cdf((1.0 - t) / sigma) - normal_cdf((0.0 - t) / sigma);
            let tangential = integrate(
                |s| normal_cdf((0.7 - s) / sigma) - normal_cdf((0.2 - s) / sigma),
                -2.0,
                3.0,
                1e-13,
                1e-12,
                500,
            )
            .unwrap()
            .value;
            assert!((v - first * tangential).abs() < 1e-6, "t={t}: {v} vs {}", first * tangential);
        }
    }

    #[test]
    fn d1_and_d3() {
        let g = RadonSliceGrid::new(vec![-1.0], 0.5, 1.0, 1, 1, 1.0).unwrap();
        assert_eq!(radon_transform(|x| x[0], &g).unwrap(), vec![-0.5]);
        // Unit ball: slice area π(1 − t²).
        let b = vec![1.0 / 3f64.sqrt(); 3];
        let g = RadonSliceGrid::new(b, 0.0, 0.5, 2, 600, 1.2).unwrap();
        let ball = |x: &[f64]| if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 { 1.0 } else { 0.0 };
        let r = radon_transform(ball, &g).unwrap();
        assert!((r[0] - std::f64::consts::PI).abs() < 1e-2);
        assert!((r[1] - 0.75 * std::f64::consts::PI).abs() < 1e-2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RadonSliceGrid::new(vec![1.0, 1.0], 0.0, 0.1, 3, 10, 1.0).is_err());
        let g = RadonSliceGrid::new(vec![1.0, 0.0, 0.0, 0.0], 0.0, 0.1, 3, 10, 1.0).unwrap();
        assert!(matches!(radon_transform(|_| 1.0, &g), Err(Error::Unsupported(_))));
        let narrow = RadonSliceGrid::new(vec![1.0, 0.0], 0.0, 0.1, 3, 10, 0.5).unwrap();
        assert!(radon_transform(disc, &narrow).is_err());
    }
}
