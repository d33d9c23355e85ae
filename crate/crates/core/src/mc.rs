//! Sharded Monte Carlo over a [`Sampler`].

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::AxisBox;
use crate::rng::{derived_rng, shard_sizes, Rng};

/// Number of independent shards a Monte Carlo run is split into.
pub const SHARDS: usize = 64;

/// Input distribution for Monte Carlo estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    /// Uniform on an axis-aligned box.
    Uniform { domain: AxisBox },
    /// Point mass.
    Dirac { point: Vec<f64> },
    /// Isotropic normal.
    Gaussian { mean: Vec<f64>, std: f64 },
}

impl Sampler {
    pub fn unit_cube(d: usize) -> Result<Self> {
        Ok(Sampler::Uniform { domain: AxisBox::unit_cube(d)? })
    }

    pub fn dim(&self) -> usize {
        match self {
            Sampler::Uniform { domain } => domain.dim(),
            Sampler::Dirac { point } => point.len(),
            Sampler::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Sampler::Uniform { .. } => Ok(()),
            Sampler::Dirac { point } if point.is_empty() => Err(Error::Empty("dirac point")),
            Sampler::Dirac { point } if point.iter().any(|v| !v.is_finite()) => {
                Err(Error::invalid("point", "must be finite"))
            }
            Sampler::Dirac { .. } => Ok(()),
            Sampler::Gaussian { mean, std } => {
                if mean.is_empty() {
                    Err(Error::Empty("gaussian mean"))
                } else if !(*std > 0.0 && std.is_finite()) {
                    Err(Error::invalid("std", "must be positive and finite"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Parses a sampler from JSON, rejecting unknown kinds.
    pub fn from_json(s: &str) -> Result<Self> {
        let sampler: Sampler = serde_json::from_str(s)
            .map_err(|e| Error::Unsupported(format!("sampler: {e}")))?;
        sampler.validate()?;
        Ok(sampler)
    }

    pub fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        match self {
            Sampler::Uniform { domain } => {
                for (j, v) in out.iter_mut().enumerate() {
                    let (l, u) = (domain.lower()[j], domain.upper()[j]);
                    *v = l + (u - l) * rng.random::<f64>();
                }
            }
            Sampler::Dirac { point } => out.copy_from_slice(point),
            Sampler::Gaussian { mean, std } => {
                for (v, m) in out.iter_mut().zip(mean) {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = m + std * z;
                }
            }
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Estimates `E[f(X)]` with `n` draws split across [`SHARDS`] seeded shards.
///
/// Shard `i` draws from `derived_rng(seed, i)`; partial sums are combined in
/// shard order so the result does not depend on the thread pool.
pub fn expectation<F>(sampler: &Sampler, n: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    sampler.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "need at least one sample"));
    }
    let d = sampler.dim();
    let sizes = shard_sizes(n, SHARDS);
    let partial: Vec<(f64, f64)> = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &m)| {
            let mut rng = derived_rng(seed, i as u64);
            let mut x = vec![0.0; d];
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..m {
                sampler.sample_into(&mut rng, &mut x);
                let v = f(&x);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let nf = n as f64;
    let mean = s / nf;
    let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { mean, stderr: (var / nf).sqrt(), n })
}

/// Like [`expectation`] but for several functionals of the same draw.
pub fn expectations<F>(sampler: &Sampler, n: usize, seed: u64, k: usize, f: F) -> Result<Vec<McEstimate>>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    sampler.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "need at least one sample"));
    }
    let d = sampler.dim();
    let sizes = shard_sizes(n, SHARDS);
    let partial: Vec<Vec<(f64, f64)>> = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &m)| {
            let mut rng = derived_rng(seed, i as u64);
            let mut x = vec![0.0; d];
            let mut vals = vec![0.0; k];
            let mut acc = vec![(0.0, 0.0); k];
            for _ in 0..m {
                sampler.sample_into(&mut rng, &mut x);
                f(&x, &mut vals);
                for (a, v) in acc.iter_mut().zip(&vals) {
                    a.0 += v;
                    a.1 += v * v;
                }
            }
            acc
        })
        .collect();
    let nf = n as f64;
    Ok((0..k)
        .map(|j| {
            let (s, s2) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p[j].0, acc.1 + p[j].1));
            let mean = s / nf;
            let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
            McEstimate { mean, stderr: (var / nf).sqrt(), n }
        })
        .collect())
}

pub(crate) fn check_sampler_dim(sampler: &Sampler, d: usize) -> Result<()> {
    check_dim(d, sampler.dim())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mean_is_center() {
        let s = Sampler::unit_cube(3).unwrap();
        let e = expectation(&s, 200_000, 1, |x| x[0] + x[1] + x[2]).unwrap();
        assert!((e.mean - 1.5).abs() < 4.0 * e.stderr);
    }

    #[test]
    fn deterministic_given_seed() {
        let s = Sampler::unit_cube(2).unwrap();
        let a = expectation(&s, 10_000, 9, |x| x[0] * x[1]).unwrap();
        let b = expectation(&s, 10_000, 9, |x| x[0] * x[1]).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn unknown_sampler_kind_is_unsupported() {
        let r = Sampler::from_json(r#"{"kind":"cauchy","scale":1.0}"#);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_samples_rejected() {
        let s = Sampler::unit_cube(1).unwrap();
        assert!(expectation(&s, 0, 0, |_| 0.0).is_err());
    }
}
