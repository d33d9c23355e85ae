//! Shared fixtures for the benchmarks.

use rand::Rng as _;
use rtvlab_core::rng::rng_from_seed;
use rtvlab_core::{AxisBox, BoxUnion};

/// `n` points drawn uniformly from `[0, 1]^d`, flattened row-major.
pub fn uniform_points(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n * d).map(|_| rng.random::<f64>()).collect()
}

/// The centred cube `[0.25, 0.75]^d`.
pub fn centred_box(d: usize) -> BoxUnion {
    BoxUnion::single(AxisBox::cube(d, 0.25, 0.75).expect("valid cube"))
}
