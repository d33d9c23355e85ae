//! Single-hidden-layer ReLU network trained on squared error of the raw output.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed};

/// Inputs with real-valued targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl LabeledSet {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        check_dim(x.rows(), y.len())?;
        Ok(LabeledSet { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }
}

/// `x ↦ c + Σ_k a_k max(0, w_k·x + b_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Checkpoint", into = "Checkpoint")]
pub struct MlpModel {
    w: Matrix,
    b: Vec<f64>,
    a: Vec<f64>,
    c: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Shape {
    input_dim: usize,
    width: usize,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    shape: Shape,
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    a: Vec<f64>,
    c: f64,
}

impl TryFrom<Checkpoint> for MlpModel {
    type Error = Error;

    fn try_from(ck: Checkpoint) -> Result<Self> {
        let w = Matrix::from_rows(&ck.w)?;
        if w.rows() != ck.shape.width || (w.rows() > 0 && w.cols() != ck.shape.input_dim) {
            return Err(Error::invalid("shape", "weight matrix does not match the shape header"));
        }
        MlpModel::from_parts(w, ck.b, ck.a, ck.c)
    }
}

impl From<MlpModel> for Checkpoint {
    fn from(m: MlpModel) -> Self {
        Checkpoint {
            shape: Shape { input_dim: m.input_dim(), width: m.width() },
            w: m.w.iter_rows().map(<[f64]>::to_vec).collect(),
            b: m.b,
            a: m.a,
            c: m.c,
        }
    }
}

impl MlpModel {
    pub fn from_parts(w: Matrix, b: Vec<f64>, a: Vec<f64>, c: f64) -> Result<Self> {
        if w.rows() == 0 || w.cols() == 0 {
            return Err(Error::invalid("width", "need at least one hidden unit and one input"));
        }
        check_dim(w.rows(), b.len())?;
        check_dim(w.rows(), a.len())?;
        let m = MlpModel { w, b, a, c };
        if !m.params().iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("parameters", "entries must be finite"));
        }
        Ok(m)
    }

    pub fn zeros(d: usize, width: usize) -> Result<Self> {
        Self::from_parts(Matrix::zeros(width, d), vec![0.0; width], vec![0.0; width], 0.0)
    }

    pub fn width(&self) -> usize {
        self.w.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.b
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.a
    }

    pub fn output_bias(&self) -> f64 {
        self.c
    }

    pub fn n_params(&self) -> usize {
        self.width() * (self.input_dim() + 2) + 1
    }

    /// Flat parameter vector `[W (row-major), b, a, c]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(self.w.as_slice());
        p.extend_from_slice(&self.b);
        p.extend_from_slice(&self.a);
        p.push(self.c);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        check_dim(self.n_params(), p.len())?;
        let (kd, k) = (self.width() * self.input_dim(), self.width());
        self.w.as_mut_slice().copy_from_slice(&p[..kd]);
        self.b.copy_from_slice(&p[kd..kd + k]);
        self.a.copy_from_slice(&p[kd + k..kd + 2 * k]);
        self.c = p[kd + 2 * k];
        Ok(())
    }

    fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let mut out = self.c;
        for (k, wk) in self.w.iter_rows().enumerate() {
            let z = dot(wk, x) + self.b[k];
            if z > 0.0 {
                out += self.a[k] * z;
            }
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.forward_unchecked(x))
    }

    /// Raw outputs for every row.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.cols())?;
        Ok(x.iter_rows().map(|r| self.forward_unchecked(r)).collect())
    }

    /// Mean of `(f(x) − y)²` (no ½).
    pub fn raw_mse(&self, set: &LabeledSet) -> Result<f64> {
        let p = self.predict(&set.x)?;
        if p.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        Ok(p.iter().zip(&set.y).map(|(f, y)| (f - y) * (f - y)).sum::<f64>() / p.len() as f64)
    }

    /// Mean of `½(f(x_i) − y_i)²` over `rows` and its gradient in the
    /// [`params`](Self::params) layout.
    pub fn loss_and_gradient(&self, set: &LabeledSet, rows: &[usize]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.input_dim(), set.dim())?;
        if rows.is_empty() {
            return Err(Error::Empty("minibatch"));
        }
        if rows.iter().any(|&i| i >= set.len()) {
            return Err(Error::invalid("rows", "index out of range"));
        }
        let mut grad = vec![0.0; self.n_params()];
        let loss = self.accumulate(set, rows, &mut grad, &mut vec![0.0; self.width()]);
        Ok((loss, grad))
    }

    fn accumulate(&self, set: &LabeledSet, rows: &[usize], grad: &mut [f64], z: &mut [f64]) -> f64 {
        let (d, k) = (self.input_dim(), self.width());
        let (kd, scale) = (k * d, 1.0 / rows.len() as f64);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for &i in rows {
            let x = set.x.row(i);
            let mut f = self.c;
            for (j, wk) in self.w.iter_rows().enumerate() {
                z[j] = dot(wk, x) + self.b[j];
                if z[j] > 0.0 {
                    f += self.a[j] * z[j];
                }
            }
            let r = f - set.y[i];
            loss += 0.5 * r * r;
            let rs = r * scale;
            for j in 0..k {
                if z[j] > 0.0 {
                    grad[kd + k + j] += rs * z[j];
                    let back = rs * self.a[j];
                    grad[kd + j] += back;
                    let gw = &mut grad[j * d..(j + 1) * d];
                    for (g, xv) in gw.iter_mut().zip(x) {
                        *g += back * xv;
                    }
                }
            }
            grad[kd + 2 * k] += rs;
        }
        loss * scale
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Output weights start in `±OUTPUT_INIT_SCALE / √width`.
pub const OUTPUT_INIT_SCALE: f64 = 0.1;

/// Glorot-uniform hidden weights, zero biases, small uniform output weights.
pub fn init(d: usize, width: usize, seed: u64) -> Result<MlpModel> {
    if d == 0 || width == 0 {
        return Err(Error::invalid("width", "need d >= 1 and width >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let r = (6.0 / (d + width) as f64).sqrt();
    let w: Vec<f64> = (0..width * d).map(|_| rng.random_range(-r..r)).collect();
    let s = OUTPUT_INIT_SCALE / (width as f64).sqrt();
    let a: Vec<f64> = (0..width).map(|_| rng.random_range(-s..s)).collect();
    MlpModel::from_parts(Matrix::from_vec(width, d, w)?, vec![0.0; width], a, 0.0)
}

/// `½(‖W‖_F² + ‖a‖²)`; biases excluded.
pub fn rtv_proxy(m: &MlpModel) -> f64 {
    0.5 * (m.w.as_slice().iter().map(|v| v * v).sum::<f64>() + m.a.iter().map(|v| v * v).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Decoupled decay on `W` and `a`, applied as `p ← p − lr·decay·p`.
    pub weight_decay: f64,
    pub seed: u64,
    /// Cosine decay of the step size to `lr_floor · learning_rate` by the
    /// last epoch; 1 keeps it constant.
    #[serde(default = "one")]
    pub lr_floor: f64,
    /// Raw-MSE levels whose first crossing epoch is recorded.
    #[serde(default)]
    pub mse_targets: Vec<f64>,
    /// End training once every target has been crossed.
    #[serde(default)]
    pub stop_when_crossed: bool,
}

fn one() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            width: 64,
            epochs: 100,
            batch_size: 256,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 1e-4,
            lr_floor: 0.01,
            seed: 0,
            mse_targets: vec![0.20, 0.25, 0.30, 0.40],
            stop_when_crossed: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.batch_size == 0 {
            return Err(Error::invalid("train_config", "width and batch_size must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be finite and nonnegative"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::invalid("adam", "beta1 and beta2 must lie in (0, 1)"));
        }
        if !(self.adam_eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("adam", "eps must be positive and weight_decay nonnegative"));
        }
        if !(self.lr_floor > 0.0 && self.lr_floor <= 1.0) {
            return Err(Error::invalid("lr_floor", "must lie in (0, 1]"));
        }
        if self.mse_targets.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::invalid("mse_targets", "targets must be positive"));
        }
        Ok(())
    }

    /// Step size used throughout `epoch` (1-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.lr_floor >= 1.0 || self.epochs <= 1 {
            return self.learning_rate;
        }
        let progress = (epoch.saturating_sub(1)) as f64 / (self.epochs - 1) as f64;
        let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        self.learning_rate * (self.lr_floor + (1.0 - self.lr_floor) * cosine)
    }

    /// Seed of the batch permutation in `epoch` (1-based).
    pub fn shuffle_seed(&self, epoch: usize) -> u64 {
        derive_seed(self.seed, epoch as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_mse: Option<f64>,
    pub rtv_proxy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub target: f64,
    pub epoch: Option<usize>,
    pub rtv_proxy: Option<f64>,
}

/// Per-epoch history; epoch 0 is the initial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
    pub crossings: Vec<Crossing>,
    /// `"test"` when a test split was supplied, otherwise `"val"`.
    pub crossing_split: String,
}

impl TrainTrace {
    pub fn last(&self) -> &EpochRecord {
        self.records.last().expect("trace holds the initial record")
    }

    /// Rows `epoch,train_mse,val_mse,rtv_proxy`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epoch", "train_mse", "val_mse", "rtv_proxy"])?;
        for r in &self.records {
            wr.write_record([
                r.epoch.to_string(),
                crate::fmt9(r.train_mse),
                crate::fmt9(r.val_mse),
                crate::fmt9(r.rtv_proxy),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub trace: TrainTrace,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Minibatch Adam on `½(f(x) − y)²` with decoupled weight decay on `W` and `a`.
///
/// Batches follow a fresh permutation each epoch, drawn from
/// [`TrainConfig::shuffle_seed`]. A non-finite loss aborts with
/// [`Error::TrainingDiverged`].
pub fn train(
    model: MlpModel,
    train_set: &LabeledSet,
    val_set: &LabeledSet,
    test_set: Option<&LabeledSet>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    for s in [Some(train_set), Some(val_set), test_set].into_iter().flatten() {
        check_dim(model.input_dim(), s.dim())?;
    }
    let mut model = model;
    let (d, k) = (model.input_dim(), model.width());
    let a_range = k * (d + 1)..k * (d + 2);
    let mut opt = Adam { m: vec![0.0; model.n_params()], v: vec![0.0; model.n_params()], t: 0 };
    let mut params = model.params();
    let mut grad = vec![0.0; params.len()];
    let mut z = vec![0.0; k];

    let mut crossings: Vec<Crossing> =
        cfg.mse_targets.iter().map(|&t| Crossing { target: t, epoch: None, rtv_proxy: None }).collect();
    let mut records = Vec::with_capacity(cfg.epochs + 1);
    let mut record = |model: &MlpModel, epoch: usize, crossings: &mut [Crossing]| -> Result<()> {
        let rec = EpochRecord {
            epoch,
            train_mse: model.raw_mse(train_set)?,
            val_mse: model.raw_mse(val_set)?,
            test_mse: test_set.map(|s| model.raw_mse(s)).transpose()?,
            rtv_proxy: rtv_proxy(model),
        };
        if !(rec.train_mse.is_finite() && rec.val_mse.is_finite()) {
            return Err(Error::TrainingDiverged { epoch, detail: format!("non-finite MSE {rec:?}") });
        }
        let watched = rec.test_mse.unwrap_or(rec.val_mse);
        for c in crossings.iter_mut() {
            if c.epoch.is_none() && watched < c.target {
                c.epoch = Some(epoch);
                c.rtv_proxy = Some(rec.rtv_proxy);
            }
        }
        records.push(rec);
        Ok(())
    };
    record(&model, 0, &mut crossings)?;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        if cfg.stop_when_crossed && !crossings.is_empty() && crossings.iter().all(|c| c.epoch.is_some()) {
            break;
        }
        order.sort_unstable();
        order.shuffle(&mut rng_from_seed(cfg.shuffle_seed(epoch)));
        let lr = cfg.learning_rate_at(epoch);
        for batch in order.chunks(cfg.batch_size) {
            let loss = model.accumulate(train_set, batch, &mut grad, &mut z);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch, detail: format!("minibatch loss {loss}") });
            }
            opt.t += 1;
            let bc1 = 1.0 - cfg.beta1.powi(opt.t);
            let bc2 = 1.0 - cfg.beta2.powi(opt.t);
            for i in 0..params.len() {
                let g = grad[i];
                opt.m[i] = cfg.beta1 * opt.m[i] + (1.0 - cfg.beta1) * g;
                opt.v[i] = cfg.beta2 * opt.v[i] + (1.0 - cfg.beta2) * g * g;
                let step = (opt.m[i] / bc1) / ((opt.v[i] / bc2).sqrt() + cfg.adam_eps);
                params[i] -= lr * step;
            }
            if cfg.weight_decay > 0.0 {
                let shrink = 1.0 - lr * cfg.weight_decay;
                for i in (0..k * d).chain(a_range.clone()) {
                    params[i] *= shrink;
                }
            }
            model.set_params(&params)?;
        }
        record(&model, epoch, &mut crossings)?;
    }
    Ok(TrainOutcome {
        model,
        trace: TrainTrace {
            records,
            crossings,
            crossing_split: if test_set.is_some() { "test" } else { "val" }.to_string(),
        },
    })
}
