//! Uniform box-classification datasets, their CSV form, and 2-D slice grids.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AxisBox;
use crate::matrix::Matrix;
use crate::nn::LabeledSet;
use crate::rng::{rng_from_seed, PRNG_ID};

pub const PAPER_D5_LOWER: f64 = 0.0471381679;
pub const PAPER_D5_UPPER: f64 = 0.9528618321;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub d: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Positive class: points inside this closed box.
    #[serde(rename = "box")]
    pub target: AxisBox,
    pub domain: AxisBox,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(target: AxisBox, n_train: usize, n_val: usize, n_test: usize, seed: u64) -> Result<Self> {
        let d = target.dim();
        let spec = DatasetSpec { d, n_train, n_val, n_test, target, domain: AxisBox::unit_cube(d)?, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(Error::invalid("counts", "train, val and test counts must be positive"));
        }
        if self.target.dim() != self.d || self.domain.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: self.target.dim().min(self.domain.dim()) });
        }
        let inside = (0..self.d).all(|j| {
            self.target.lower()[j] >= self.domain.lower()[j] && self.target.upper()[j] <= self.domain.upper()[j]
        });
        if !inside {
            return Err(Error::invalid("box", "target box must lie inside the domain"));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// The five-dimensional benchmark: `[ℓ, u]^5` in the unit cube, 100000/20000/20000 points.
pub fn paper_d5_spec() -> DatasetSpec {
    let target = AxisBox::cube(5, PAPER_D5_LOWER, PAPER_D5_UPPER).expect("constant box is valid");
    DatasetSpec::new(target, 100_000, 20_000, 20_000, 0).expect("constant spec is valid")
}

/// Ten-dimensional task with a centred box of volume 1/2 (side `0.5^{1/10}`).
pub fn d10_half_volume_spec() -> DatasetSpec {
    let side = 0.5f64.powf(0.1);
    let target = AxisBox::cube(10, 0.5 - side / 2.0, 0.5 + side / 2.0).expect("constant box is valid");
    DatasetSpec::new(target, 100_000, 20_000, 20_000, 0).expect("constant spec is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub spec: DatasetSpec,
    pub seed: u64,
    pub prng: String,
    pub positive_count: usize,
    pub positives: SplitCounts,
    pub sizes: SplitCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub spec: DatasetSpec,
    pub train: LabeledSet,
    pub val: LabeledSet,
    pub test: LabeledSet,
}

fn positives(s: &LabeledSet) -> usize {
    s.y.iter().filter(|y| **y == 1.0).count()
}

impl GeneratedDataset {
    pub fn metadata(&self) -> DatasetMetadata {
        let positives = SplitCounts { train: positives(&self.train), val: positives(&self.val), test: positives(&self.test) };
        DatasetMetadata {
            spec: self.spec.clone(),
            seed: self.spec.seed,
            prng: PRNG_ID.to_string(),
            positive_count: positives.train + positives.val + positives.test,
            positives,
            sizes: SplitCounts { train: self.train.len(), val: self.val.len(), test: self.test.len() },
        }
    }

    /// Writes `train.csv`, `val.csv`, `test.csv` and `metadata.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            let p = dir.join(format!("{name}.csv"));
            write_csv(set, fs::File::create(&p)?)?;
            paths.push(p);
        }
        let p = dir.join("metadata.json");
        fs::write(&p, serde_json::to_string_pretty(&self.metadata())?)?;
        paths.push(p);
        Ok(paths)
    }

    /// Reads a directory written by [`write_dir`](Self::write_dir).
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let meta: DatasetMetadata = serde_json::from_str(&fs::read_to_string(dir.join("metadata.json"))?)?;
        let load = |name: &str| -> Result<LabeledSet> { read_csv(fs::File::open(dir.join(format!("{name}.csv")))?) };
        let data = GeneratedDataset { spec: meta.spec, train: load("train")?, val: load("val")?, test: load("test")? };
        if data.metadata().sizes != meta.sizes {
            return Err(Error::invalid("dataset", "split sizes disagree with metadata"));
        }
        Ok(data)
    }
}

fn sample_split(spec: &DatasetSpec, rng: &mut crate::rng::Rng, n: usize) -> Result<LabeledSet> {
    let d = spec.d;
    let mut x = Matrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let row = x.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = rng.random_range(spec.domain.lower()[j]..spec.domain.upper()[j]);
        }
        y.push(if spec.target.contains(row) { 1.0 } else { 0.0 });
    }
    LabeledSet::new(x, y)
}

/// Uniform samples from the domain, labelled by membership in the box.
///
/// One generator stream seeded from `spec.seed` fills train, then
/// validation, then test, so the splits are disjoint draws.
pub fn generate(spec: &DatasetSpec) -> Result<GeneratedDataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let train = sample_split(spec, &mut rng, spec.n_train)?;
    let val = sample_split(spec, &mut rng, spec.n_val)?;
    let test = sample_split(spec, &mut rng, spec.n_test)?;
    Ok(GeneratedDataset { spec: spec.clone(), train, val, test })
}

/// CSV with header `x0..x{d-1},y`; coordinates at 17 significant digits.
pub fn write_csv<W: Write>(set: &LabeledSet, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..set.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    wr.write_record(&header)?;
    for (row, y) in set.x.iter_rows().zip(&set.y) {
        let mut rec: Vec<String> = row.iter().map(|v| crate::fmt17(*v)).collect();
        rec.push(if *y == 1.0 || *y == 0.0 { format!("{}", *y as u8) } else { crate::fmt17(*y) });
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<LabeledSet> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> = (0..d).map(|j| format!("x{j}")).chain(["y".to_string()]).collect();
    if d == 0 || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(Error::invalid("csv header", format!("expected x0..x{},y", d.saturating_sub(1))));
    }
    let mut data = Vec::new();
    let mut y = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::invalid("csv value", format!("{s:?}: {e}"))))
            .collect::<Result<_>>()?;
        data.extend_from_slice(&vals[..d]);
        y.push(vals[d]);
    }
    LabeledSet::new(Matrix::from_vec(y.len(), d, data)?, y)
}

/// A square grid over two coordinates with the others held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub vary_dims: (usize, usize),
    /// Values of the held coordinates; an empty list means 0.5 everywhere.
    #[serde(default)]
    pub fixed_values: Vec<f64>,
    pub side: usize,
    pub window: (f64, f64),
}

impl Default for SliceSpec {
    fn default() -> Self {
        SliceSpec { vary_dims: (0, 1), fixed_values: Vec::new(), side: 500, window: (-0.25, 1.25) }
    }
}

/// Grid points, row-major with the first varied coordinate changing fastest.
pub fn slice_grid(spec: &SliceSpec, d: usize) -> Result<Matrix> {
    let (i, j) = spec.vary_dims;
    if i == j || i >= d || j >= d {
        return Err(Error::invalid("vary_dims", format!("need two distinct indices below {d}, got ({i}, {j})")));
    }
    if spec.side < 2 || !(spec.window.1 > spec.window.0) {
        return Err(Error::invalid("slice", "need side >= 2 and a nonempty window"));
    }
    let base = if spec.fixed_values.is_empty() {
        vec![0.5; d]
    } else if spec.fixed_values.len() == d {
        spec.fixed_values.clone()
    } else {
        return Err(Error::DimensionMismatch { expected: d, got: spec.fixed_values.len() });
    };
    let (lo, hi) = spec.window;
    let step = (hi - lo) / (spec.side - 1) as f64;
    let coord = |k: usize| if k + 1 == spec.side { hi } else { lo + k as f64 * step };
    let mut m = Matrix::zeros(spec.side * spec.side, d);
    for r in 0..spec.side {
        for c in 0..spec.side {
            let row = m.row_mut(r * spec.side + c);
            row.copy_from_slice(&base);
            row[i] = coord(c);
            row[j] = coord(r);
        }
    }
    Ok(m)
}
