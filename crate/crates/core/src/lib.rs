//! Axis-aligned box targets, tree classifiers and their smooth surrogates,
//! infinitely smooth barrier scores, Radon total variation estimators, and a
//! small shallow-network trainer used to probe how width tracks that norm.

pub mod barrier;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod geometry;
pub mod matrix;
pub mod mc;
pub mod nn;
pub mod quad;
pub mod rng;
pub mod rtv;
pub mod smoothing;
pub mod trees;

pub use barrier::{BarrierParams, BarrierScore};
pub use error::{Error, ErrorClass, Result};
pub use geometry::{AxisBox, BoxUnion, FaceSkeleton};
pub use matrix::Matrix;
pub use mc::{McEstimate, Sampler};
pub use nn::{LabeledSet, MlpModel, TrainConfig, TrainTrace};
pub use rtv::{DivergenceStudy, RadonSliceGrid, Scalar1DFunction, SinhIntegrandSpec};
pub use smoothing::{Scheme, SmoothSurrogate, Split, SplitList};
pub use trees::TreeNode;

/// Report formatting: 9 significant digits.
pub fn fmt9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Round-trip formatting: 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
