use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rtvlab_core::barrier::{score_union, DEFAULT_C0};
use rtvlab_core::datasets::{
    d10_half_volume_spec, generate, paper_d5_spec, slice_grid, DatasetSpec, GeneratedDataset, SliceSpec,
    PAPER_D5_LOWER, PAPER_D5_UPPER,
};
use rtvlab_core::experiments::{
    barrier_sweep, frontier_report, geometric_ladder, iou, iou_at, optimize_threshold, width_sweep, ExperimentRun,
    SweepConfig, ThresholdPolicy,
};
use rtvlab_core::fit::log_log_fit;
use rtvlab_core::nn::{init, rtv_proxy};
use rtvlab_core::rng::derive_seed;
use rtvlab_core::rtv::{
    barrier_rtv_1d, gaussian_bound_check, rtv_1d_step_divergence, sigmoid_divergence_study, Jump, ShellMetric,
};
use rtvlab_core::trees::{fit_tree, TreeConfig};
use rtvlab_core::{
    fmt9, AxisBox, BarrierParams, BoxUnion, Error, MlpModel, Result, Sampler, SinhIntegrandSpec, TrainConfig, TreeNode,
};
use serde::{Deserialize, Serialize};

use crate::config::{resolve, Context};
use crate::GlobalArgs;

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

fn need<T>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or_else(|| invalid(name, "required"))
}

fn write(dir: &Path, name: &str, content: impl AsRef<[u8]>) -> Result<()> {
    fs::write(dir.join(name), content)?;
    Ok(())
}

/// One value is repeated `d` times; otherwise exactly `d` values are needed.
fn broadcast(v: &[f64], d: usize, name: &'static str) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; d]),
        n if n == d => Ok(v.to_vec()),
        n => Err(invalid(name, format!("expected 1 or {d} values, got {n}"))),
    }
}

fn target_box(lower: &Option<Vec<f64>>, upper: &Option<Vec<f64>>, d: usize, default: (f64, f64)) -> Result<AxisBox> {
    let lo = broadcast(lower.as_deref().unwrap_or(&[default.0]), d, "lower")?;
    let hi = broadcast(upper.as_deref().unwrap_or(&[default.1]), d, "upper")?;
    AxisBox::new(lo, hi)
}

fn truth(y: &[f64]) -> Vec<bool> {
    y.iter().map(|v| *v == 1.0).collect()
}

fn load_dataset(ctx: &Context, path: &Path) -> Result<GeneratedDataset> {
    ctx.info(format!("reading dataset {}", path.display()));
    GeneratedDataset::read_dir(path)
}

// ---------------------------------------------------------------- gen

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GenArgs {
    /// The d = 5 benchmark: box [0.0471381679, 0.9528618321]^5, 100000/20000/20000 points
    #[arg(long)]
    pub paper_d5: bool,
    /// The d = 10 task with a centred box of volume 1/2
    #[arg(long, conflicts_with = "paper_d5")]
    pub d10_half: bool,
    /// Dimension of a custom box target
    #[arg(long)]
    pub d: Option<usize>,
    /// Lower corner of a custom box: one value for every axis, or d values
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lower: Option<Vec<f64>>,
    /// Upper corner of a custom box: one value for every axis, or d values
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub upper: Option<Vec<f64>>,
    /// Training points (custom default 100000)
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Validation points (custom default 20000)
    #[arg(long)]
    pub n_val: Option<usize>,
    /// Test points (custom default 20000)
    #[arg(long)]
    pub n_test: Option<usize>,
}

fn gen_spec(a: &GenArgs, seed: u64) -> Result<DatasetSpec> {
    let preset = if a.paper_d5 {
        Some(paper_d5_spec())
    } else if a.d10_half {
        Some(d10_half_volume_spec())
    } else {
        None
    };
    let mut spec = match preset {
        Some(s) => {
            if a.d.is_some() || a.lower.is_some() || a.upper.is_some() {
                return Err(invalid("d", "a preset fixes the box; drop d/lower/upper"));
            }
            s
        }
        None => {
            let d = match (a.d, &a.lower) {
                (Some(d), _) => d,
                (None, Some(l)) if l.len() > 1 => l.len(),
                _ => return Err(invalid("d", "give --d, a preset (--paper-d5, --d10-half) or a full --lower corner")),
            };
            if d == 0 {
                return Err(invalid("d", "dimension must be at least 1"));
            }
            let b = target_box(&a.lower, &a.upper, d, (PAPER_D5_LOWER, PAPER_D5_UPPER))?;
            DatasetSpec::new(b, 100_000, 20_000, 20_000, seed)?
        }
    };
    spec.n_train = a.n_train.unwrap_or(spec.n_train);
    spec.n_val = a.n_val.unwrap_or(spec.n_val);
    spec.n_test = a.n_test.unwrap_or(spec.n_test);
    let spec = spec.with_seed(seed);
    spec.validate()?;
    Ok(spec)
}

pub fn gen(g: &GlobalArgs, flags: &GenArgs) -> Result<()> {
    let (ctx, a) = resolve(g, flags)?;
    let spec = gen_spec(&a, ctx.seed)?;
    let out = ctx.out_dir()?;
    ctx.info(format!("sampling {} points in d = {}", spec.total(), spec.d));
    let data = generate(&spec)?;
    data.write_dir(out)?;
    ctx.echo(out, "gen", &a)?;
    let meta = data.metadata();
    let total = spec.total();
    println!(
        "wrote {total} rows to {} (train {}, val {}, test {})",
        out.display(),
        meta.sizes.train,
        meta.sizes.val,
        meta.sizes.test
    );
    println!(
        "positive rate: {:.5} ({} of {total}); box volume {:.7}",
        meta.positive_count as f64 / total as f64,
        meta.positive_count,
        spec.target.volume()
    );
    Ok(())
}

// ---------------------------------------------------------------- tree

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TreeArgs {
    /// Dataset directory written by `gen`
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Maximum tree depth (default 6)
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Minimum points per leaf (default 1)
    #[arg(long)]
    pub min_leaf: Option<usize>,
}

pub fn tree(g: &GlobalArgs, flags: &TreeArgs) -> Result<()> {
    let (ctx, a) = resolve(g, flags)?;
    let data_dir = need(a.data.clone(), "data")?;
    let data = load_dataset(&ctx, &data_dir)?;
    let defaults = TreeConfig::default();
    let cfg = TreeConfig {
        max_depth: a.max_depth.unwrap_or(defaults.max_depth),
        min_leaf: a.min_leaf.unwrap_or(defaults.min_leaf),
    };
    let labels: Vec<u8> = data.train.y.iter().map(|v| u8::from(*v == 1.0)).collect();
    let t = fit_tree(&data.train.x, &labels, &cfg)?;
    let out = ctx.out_dir()?;
    let mut csv = String::from("split,accuracy,iou\n");
    let mut test_iou = 0.0;
    for (name, set) in [("train", &data.train), ("val", &data.val), ("test", &data.test)] {
        let pred: Vec<bool> = set.x.iter_rows().map(|r| t.predict(r) == 1).collect();
        let tr = truth(&set.y);
        let acc = pred.iter().zip(&tr).filter(|(p, t)| p == t).count() as f64 / tr.len().max(1) as f64;
        let j = iou(&pred, &tr)?;
        if name == "test" {
            test_iou = j;
        }
        csv.push_str(&format!("{name},{},{}\n", fmt9(acc), fmt9(j)));
    }
    let boxes = t.to_boxes(&data.spec.domain);
    write(out, "tree.json", serde_json::to_string_pretty(&t)?)?;
    write(out, "boxes.json", serde_json::to_string_pretty(&boxes)?)?;
    write(out, "metrics.csv", csv)?;
    ctx.echo(out, "tree", &a)?;
    println!(
        "tree depth {}, {} leaves, {} positive boxes; test IoU {test_iou:.4}",
        t.depth(),
        t.n_leaves(),
        boxes.as_ref().map_or(0, |b| b.boxes().len())
    );
    Ok(())
}

// ---------------------------------------------------------------- train / sweep

/// Optimiser settings shared by `train` and `sweep`.
#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields, default)]
pub struct HyperArgs {
    /// Passes over the training split (default 100)
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size (default 256)
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam step size (default 0.01)
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Decoupled weight decay on W and a (default 1e-4)
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Final step size as a fraction of the initial one under cosine decay (default 0.01)
    #[arg(long)]
    pub lr_floor: Option<f64>,
    /// Raw-MSE levels whose first crossing is recorded (default 0.2,0.25,0.3,0.4)
    #[arg(long, value_delimiter = ',')]
    pub mse_targets: Option<Vec<f64>>,
    /// Stop once every MSE target has been crossed
    #[arg(long)]
    pub stop_when_crossed: bool,
    /// Thresholds in the validation grid search (default 201)
    #[arg(long)]
    pub threshold_grid: Option<usize>,
    /// Use this fixed threshold instead of the grid search
    #[arg(long, allow_negative_numbers = true, conflicts_with = "threshold_grid")]
    pub tau: Option<f64>,
}

impl HyperArgs {
    fn train_config(&self, width: usize, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            width,
            seed,
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            lr_floor: self.lr_floor.unwrap_or(d.lr_floor),
            mse_targets: self.mse_targets.clone().unwrap_or(d.mse_targets.clone()),
            stop_when_crossed: self.stop_when_crossed,
            ..d
        }
    }

    fn threshold(&self) -> Result<ThresholdPolicy> {
        match (self.tau, self.threshold_grid) {
            (Some(_), Some(_)) => Err(invalid("tau", "give either a fixed tau or a threshold grid")),
            (Some(tau), None) => Ok(ThresholdPolicy::Fixed { tau }),
            (None, Some(grid)) => Ok(ThresholdPolicy::Optimized { grid }),
            (None, None) => Ok(ThresholdPolicy::default()),
        }
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TrainArgs {
    /// Dataset directory written by `gen`
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Hidden units (default 64)
    #[arg(long)]
    pub width: Option<usize>,
    #[command(flatten)]
    pub train: HyperArgs,
}

fn name_cell(e: Error, width: usize, seed: u64) -> Error {
    match e {
        Error::TrainingDiverged { epoch, detail } => {
            Error::TrainingDiverged { epoch, detail: format!("width {width}, seed {seed}: {detail}") }
        }
        other => other,
    }
}

pub fn train(g: &GlobalArgs, flags: &TrainArgs) -> Result<()> {
    let (ctx, a) = resolve(g, flags)?;
    let data_dir = need(a.data.clone(), "data")?;
    let width = a.width.unwrap_or(TrainConfig::default().width);
    let cfg = a.train.train_config(width, ctx.seed);
    cfg.validate()?;
    let policy = a.train.threshold()?;
    let data = load_dataset(&ctx, &data_dir)?;
    let out = ctx.out_dir()?;
    let init_seed = derive_seed(ctx.seed, width as u64);
    ctx.info(format!("training width {width}, seed {}, {} epochs", ctx.seed, cfg.epochs));
    let model = init(data.spec.d, width, init_seed)?;
    let res = rtvlab_core::nn::train(model, &data.train, &data.val, Some(&data.test), &cfg)
        .map_err(|e| name_cell(e, width, ctx.seed))?;
    let val_logits = res.model.predict(&data.val.x)?;
    let test_logits = res.model.predict(&data.test.x)?;
    let (val_t, test_t) = (truth(&data.val.y), truth(&data.test.y));
    let choice = optimize_threshold(&val_logits, &val_t, &policy)?;
    let last = *res.trace.last();
    let summary = serde_json::json!({
        "width": width,
        "seed": ctx.seed,
        "init_seed": init_seed,
        "epochs_run": last.epoch,
        "train_mse": last.train_mse,
        "val_mse": last.val_mse,
        "test_mse": last.test_mse,
        "rtv_proxy": rtv_proxy(&res.model),
        "threshold_policy": policy,
        "tau_star": choice.tau,
        "val_iou_tau0": iou_at(&val_logits, &val_t, 0.0)?,
        "val_iou_tau_star": choice.val_iou,
        "test_iou_tau0": iou_at(&test_logits, &test_t, 0.0)?,
        "test_iou_tau_star": iou_at(&test_logits, &test_t, choice.tau)?,
        "crossings": res.trace.crossings,
        "crossing_split": res.trace.crossing_split,
    });
    write(out, "model.json", res.model.to_json()?)?;
    res.trace.write_csv(fs::File::create(out.join("trace.csv"))?)?;
    write(out, "summary.json", serde_json::to_string_pretty(&summary)?)?;
    ctx.echo(out, "train", &a)?;
    println!(
        "width {width}: test MSE {:.5}, proxy {:.4}, tau* {:.4}, test IoU@0 {:.4}, test IoU@tau* {:.4}",
        last.test_mse.unwrap_or(f64::NAN),
        summary["rtv_proxy"].as_f64().unwrap_or(f64::NAN),
        choice.tau,
        summary["test_iou_tau0"].as_f64().unwrap_or(f64::NAN),
        summary["test_iou_tau_star"].as_f64().unwrap_or(f64::NAN),
    );
    Ok(())
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepArgs {
    /// Dataset directory written by `gen`
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Hidden widths (default 8,16,32,64,128,256)
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Seeds per width (default: the master seed and the next two)
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pub train: HyperArgs,
}

pub fn sweep(g: &GlobalArgs, flags: &SweepArgs) -> Result<()> {
    let (ctx, a) = resolve(g, flags)?;
    let data_dir = need(a.data.clone(), "data")?;
    let defaults = SweepConfig::default();
    let cfg = SweepConfig {
        widths: a.widths.clone().unwrap_or(defaults.widths),
        seeds: a.seeds.clone().unwrap_or_else(|| (0..3).map(|k| ctx.seed.wrapping_add(k)).collect()),
        train: a.train.train_config(defaults.train.width, ctx.seed),
        threshold: a.train.threshold()?,
    };
    cfg.validate()?;
    let data = load_dataset(&ctx, &data_dir)?;
    let out = ctx.out_dir()?;
    ctx.info(format!("{} cells on up to {:?} workers", cfg.widths.len() * cfg.seeds.len(), ctx.jobs));
    let run = width_sweep(&data, &cfg, ctx.jobs)?;
    run.write_dir(out, Some(&data_dir))?;
    ctx.echo(out, "sweep", &a)?;
    println!("{:>6} {:>5} {:>11} {:>13} {:>12}", "width", "seeds", "test IoU@0", "test IoU@tau*", "rtv proxy");
    for s in &run.summary {
        println!(
            "{:>6} {:>5} {:>11.4} {:>13.4} {:>12.4}",
            s.width, s.seeds, s.mean_test_iou_tau0, s.mean_test_iou_tau_star, s.mean_rtv_proxy
        );
    }
    match run.spearman_width_proxy {
        Some(r) => println!("spearman(width, proxy) = {r:.4}"),
        None => println!("spearman(width, proxy) undefined (fewer than two widths)"),
    }
    println!("run written to {}", out.display());
    Ok(())
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FrontierArgs {
    /// Run directory written by `sweep`; also the default output directory
    #[arg(long)]
    pub run: Option<PathBuf>,
}

pub fn frontier(g: &GlobalArgs, flags: &FrontierArgs) -> Result<()> {
    let (mut ctx, a) = resolve(g, flags)?;
    let run_dir = need(a.run.clone(), "run")?;
    let run = ExperimentRun::read_dir(&run_dir)?;
    if ctx.out.is_none() {
        ctx.out = Some(run_dir.clone());
    }
    let out = ctx.out_dir()?;
    let report = frontier_report(&run);
    write(out, "frontier.csv", report.to_csv()?)?;
    ctx.echo(out, "frontier", &a)?;
    println!("{:>6} {:>10} {:>11} {:>12} {:>6}", "width", "target", "first epoch", "proxy", "seeds");
    for r in &report.rows {
        println!(
            "{:>6} {:>10.4} {:>11.1} {:>12.4} {:>6}",
            r.width, r.target_mse, r.first_cross_epoch, r.rtv_proxy_at_cross, r.seeds_crossed
        );
    }
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    println!("frontier written to {}", out.join("frontier.csv").display());
    Ok(())
}

// ---------------------------------------------------------------- barrier

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierArgs {
    /// Dimension of the target box (default 2)
    #[arg(long)]
    pub d: Option<usize>,
    /// Lower corner of the target box (default 0.25 on every axis)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lower: Option<Vec<f64>>,
    /// Upper corner of the target box (default 0.75 on every axis)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub upper: Option<Vec<f64>>,
    /// Explicit geometric lambda ladder, overriding start/ratio/count
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// First rung of the lambda ladder (default 2)
    #[arg(long)]
    pub lambda_start: Option<f64>,
    /// Ratio between rungs (default 2)
    #[arg(long)]
    pub lambda_ratio: Option<f64>,
    /// Number of rungs (default 8, i.e. 2 to 256)
    #[arg(long)]
    pub lambda_count: Option<usize>,
    /// Barrier layer constant; the layer width is c0 / lambda (default 1)
    #[arg(long)]
    pub c0: Option<f64>,
    /// Monte Carlo samples per rung, uniform on the unit cube (default 1000000)
    #[arg(long)]
    pub samples: Option<usize>,
}

pub fn barrier(g: &GlobalArgs, flags: &BarrierArgs) -> Result<()> {
    let (ctx, a) = resolve(g, flags)?;
    let d = a.d.or(a.lower.as_ref().filter(|l| l.len() > 1).map(Vec::len)).unwrap_or(2);
    if d == 0 {
        return Err(invalid("d", "dimension must be at least 1"));
    }
    let b = target_box(&a.lower, &a.upper, d, (0.25, 0.75))?;
    let lambdas = match &a.lambdas {
        Some(l) => l.clone(),
        None => geometric_ladder(a.lambda_start.unwrap_or(2.0), a.lambda_ratio.unwrap_or(2.0), a.lambda_count.unwrap_or(8)),
    };
    let c0 = a.c0.unwrap_or(DEFAULT_C0);
    let n = a.samples.unwrap_or(1_000_000);
    let union = BoxUnion::single(b);
    let out = ctx.out_dir()?;
    ctx.info(format!("{} rungs, {n} samples each", lambdas.len()));
    let sweep = barrier_sweep(&union, &lambdas, c0, &Sampler::unit_cube(d)?, n, ctx.seed)?;
    write(out, "barrier.csv", sweep.to_csv()?)?;
    write(out, "barrier.json", sweep.header_json()?)?;
    ctx.echo(out, "barrier", &a)?;
    println!("{:>10} {:>14} {:>12} {:>14}", "lambda", "calibration", "stderr", "rtv bound");
    for ((l, c), r) in sweep.lambdas.iter().zip(&sweep.calibration).zip(&sweep.rtv_bound) {
        println!("{l:>10.3} {:>14.6e} {:>12.3e} {r:>14.6e}", c.mean, c.stderr);
    }
    match sweep.fit {
        Some(f) => println!("calibration slope: {:.4}", f.slope),
        None => println!("calibration slope: undefined (a rung measured zero error)"),
    }
    Ok(())
}

// ---------------------------------------------------------------- rtv

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Study {
    /// Mollified unit steps: curvature integral against the mollifier width
    StepDivergence,
    /// Sigmoid product: equator-shell masses of the Radon integrand
    SigmoidShells,
    /// Gaussian-smoothed interval: slice estimate against the closed-form bound
    GaussianBoundCheck,
    /// Barrier score of an interval: exact and slice estimates along a lambda ladder
    #[serde(rename = "barrier_rtv_1d")]
    #[value(name = "barrier_rtv_1d")]
    BarrierRtv1d,
}

impl Study {
    fn name(self) -> &'static str {
        match self {
            Study::StepDivergence => "step_divergence",
            Study::SigmoidShells => "sigmoid_shells",
            Study::GaussianBoundCheck => "gaussian_bound_check",
            Study::BarrierRtv1d => "barrier_rtv_1d",
        }
    }
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Geodesic,
    Projection,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RtvArgs {
    /// Which study to run
    #[arg(long, value_enum)]
    pub study: Option<Study>,
    /// step_divergence: mollifier widths, strictly decreasing (default 0.1,0.05,0.025,0.0125)
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<f64>>,
    /// step_divergence: jump locations (default 0)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub jumps: Option<Vec<f64>>,
    /// step_divergence: jump heights, one per location (default 1 each)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub heights: Option<Vec<f64>>,
    /// sigmoid_shells: sigmoid sharpness (default 0.5)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// sigmoid_shells: ambient dimension d; gaussian_bound_check: must be 1 (default 2 and 1)
    #[arg(long)]
    pub d: Option<usize>,
    /// sigmoid_shells: number D of orthogonal splits in the product (default 2)
    #[arg(long)]
    pub splits: Option<usize>,
    /// sigmoid_shells: shell radii, strictly decreasing (default 0.1,0.05,0.025,0.0125)
    #[arg(long, value_delimiter = ',')]
    pub shells: Option<Vec<f64>>,
    /// sigmoid_shells: distance from the equator used for shells (default geodesic)
    #[arg(long, value_enum)]
    pub metric: Option<Metric>,
    /// gaussian_bound_check: smoothing widths (default 0.25,0.5,1)
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    /// Interval lower end (default 0)
    #[arg(long, allow_negative_numbers = true)]
    pub lower: Option<f64>,
    /// Interval upper end (default 10 for gaussian_bound_check, 1 for barrier_rtv_1d)
    #[arg(long, allow_negative_numbers = true)]
    pub upper: Option<f64>,
    /// barrier_rtv_1d: lambda values (default 1,2,4,8,16)
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// barrier_rtv_1d: layer constant (default 1)
    #[arg(long)]
    pub c0: Option<f64>,
}

const DYADIC: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

fn exponent(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() >= 2 && y.iter().all(|v| *v > 0.0) {
        log_log_fit(x, y).ok().map(|f| f.slope)
    } else {
        None
    }
}

pub fn rtv(g: &GlobalArgs, flags: &RtvArgs) -> Result<()> {
    let (ctx, a) = resolve(g, flags)?;
    let study = need(a.study, "study")?;
    let out = ctx.out_dir()?;
    let name = study.name();
    ctx.info(format!("running {name}"));
    match study {
        Study::StepDivergence => {
            let locs = a.jumps.clone().unwrap_or(vec![0.0]);
            let heights = a.heights.clone().unwrap_or(vec![1.0; locs.len()]);
            if heights.len() != locs.len() {
                return Err(invalid("heights", format!("expected {} heights, got {}", locs.len(), heights.len())));
            }
            let jumps: Vec<Jump> =
                locs.iter().zip(&heights).map(|(&location, &height)| Jump { location, height }).collect();
            let s = rtv_1d_step_divergence(&jumps, a.scales.as_deref().unwrap_or(&DYADIC))?;
            s.write_csv(fs::File::create(out.join(format!("{name}.csv")))?)?;
            write(out, &format!("{name}.json"), s.header_json()?)?;
            match s.slope {
                Some(v) => println!("slope: {v:.4}"),
                None => println!("slope: undefined (no jumps)"),
            }
            println!("diverges: {}", s.diverges);
        }
        Study::SigmoidShells => {
            let d = a.d.unwrap_or(2);
            let depth = a.splits.unwrap_or(2);
            if depth == 0 || depth > d {
                return Err(invalid("splits", format!("need 1 <= splits <= d = {d}, got {depth}")));
            }
            let normals: Vec<Vec<f64>> =
                (0..depth).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
            let spec = SinhIntegrandSpec::new(a.gamma.unwrap_or(0.5), normals, d)?;
            let metric = match a.metric.unwrap_or(Metric::Geodesic) {
                Metric::Geodesic => ShellMetric::Geodesic,
                Metric::Projection => ShellMetric::Projection,
            };
            let s = sigmoid_divergence_study(&spec, a.shells.as_deref().unwrap_or(&DYADIC), metric)?;
            s.write_csv(fs::File::create(out.join(format!("{name}.csv")))?)?;
            write(out, &format!("{name}.json"), s.header_json()?)?;
            println!("{:>10} {:>14}", "shell", "mass");
            for (d, m) in s.scales.iter().zip(&s.values) {
                println!("{d:>10.5} {m:>14.6e}");
            }
            println!("masses nondecreasing: {}", s.diverges);
        }
        Study::GaussianBoundCheck => {
            let d = a.d.unwrap_or(1);
            if d != 1 {
                return Err(Error::Unsupported(format!("gaussian_bound_check runs in d = 1 only, got d = {d}")));
            }
            let b = AxisBox::new(vec![a.lower.unwrap_or(0.0)], vec![a.upper.unwrap_or(10.0)])?;
            let sigmas = a.sigma.clone().unwrap_or(vec![0.25, 0.5, 1.0]);
            let mut csv = String::from("sigma,rtv_numeric,stderr,bound,holds\n");
            let mut values = Vec::new();
            let mut all = true;
            for &s in &sigmas {
                let c = gaussian_bound_check(&b, s)?;
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt9(s),
                    fmt9(c.numeric.value),
                    fmt9(c.numeric.stderr),
                    fmt9(c.bound),
                    c.holds
                ));
                println!("sigma {s}: numeric {:.6} bound {:.6}", c.numeric.value, c.bound);
                values.push(c.numeric.value);
                all &= c.holds;
            }
            let header = serde_json::json!({
                "kind": name,
                "box": b,
                "sigma_exponent": exponent(&sigmas, &values),
                "all_hold": all,
            });
            write(out, &format!("{name}.csv"), csv)?;
            write(out, &format!("{name}.json"), serde_json::to_string_pretty(&header)?)?;
            println!("numeric ≤ bound: {all}");
        }
        Study::BarrierRtv1d => {
            let b = AxisBox::new(vec![a.lower.unwrap_or(0.0)], vec![a.upper.unwrap_or(1.0)])?;
            let lambdas = a.lambdas.clone().unwrap_or(vec![1.0, 2.0, 4.0, 8.0, 16.0]);
            let c0 = a.c0.unwrap_or(DEFAULT_C0);
            let mut csv = String::from("lambda,rtv_1d,rtv_numeric,upper_bound\n");
            let mut exact = Vec::new();
            println!("{:>10} {:>14} {:>14} {:>14}", "lambda", "rtv_1d", "rtv_numeric", "upper_bound");
            for &l in &lambdas {
                let r = barrier_rtv_1d(&b, &BarrierParams::new(l, c0)?)?;
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt9(l),
                    fmt9(r.rtv_1d),
                    fmt9(r.rtv_numeric),
                    fmt9(r.upper_bound)
                ));
                println!("{l:>10.3} {:>14.6} {:>14.6} {:>14.6}", r.rtv_1d, r.rtv_numeric, r.upper_bound);
                exact.push(r.rtv_1d);
            }
            let slope = exponent(&lambdas, &exact);
            let header = serde_json::json!({ "kind": name, "box": b, "c0": c0, "lambda_exponent": slope });
            write(out, &format!("{name}.csv"), csv)?;
            write(out, &format!("{name}.json"), serde_json::to_string_pretty(&header)?)?;
            if let Some(s) = slope {
                println!("lambda exponent: {s:.4}");
            }
        }
    }
    ctx.echo(out, "rtv", &a)?;
    Ok(())
}

// ---------------------------------------------------------------- slice

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SliceArgs {
    /// Trained network (model.json from `train`); the raw output is written
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Fitted tree (tree.json from `tree`); the 0/1 prediction is written
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Barrier score of this box lower corner (with --upper)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lower: Option<Vec<f64>>,
    /// Barrier score of this box upper corner (with --lower)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub upper: Option<Vec<f64>>,
    /// Barrier sharpness (default 16)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Barrier layer constant (default 1)
    #[arg(long)]
    pub c0: Option<f64>,
    /// Input dimension for a tree (default: highest split feature + 1)
    #[arg(long)]
    pub d: Option<usize>,
    /// The two coordinates spanning the grid (default 0,1)
    #[arg(long, value_delimiter = ',')]
    pub vary: Option<Vec<usize>>,
    /// Values of the other coordinates, in order (default 0.5 each)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub fixed: Option<Vec<f64>>,
    /// Grid points per side (default 500)
    #[arg(long)]
    pub side: Option<usize>,
    /// Grid range on both varied axes (default -0.25,1.25)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub window: Option<Vec<f64>>,
}

enum Source {
    Model(MlpModel),
    Tree(TreeNode),
    Barrier(BoxUnion, BarrierParams),
}

pub fn slice(g: &GlobalArgs, flags: &SliceArgs) -> Result<()> {
    let (ctx, a) = resolve(g, flags)?;
    let given = [a.model.is_some(), a.tree.is_some(), a.lower.is_some() || a.upper.is_some()];
    if given.iter().filter(|b| **b).count() != 1 {
        return Err(invalid("model", "give exactly one of --model, --tree or a barrier box (--lower/--upper)"));
    }
    let (source, d) = if let Some(p) = &a.model {
        let m = MlpModel::from_json(&fs::read_to_string(p)?)?;
        let d = m.input_dim();
        (Source::Model(m), d)
    } else if let Some(p) = &a.tree {
        let t: TreeNode = serde_json::from_str(&fs::read_to_string(p)?)?;
        let d = a.d.unwrap_or(t.max_feature().map_or(2, |f| (f + 1).max(2)));
        (Source::Tree(t), d)
    } else {
        let lo = need(a.lower.clone(), "lower")?;
        let b = target_box(&Some(lo.clone()), &a.upper, lo.len(), (0.0, 1.0))?;
        let d = b.dim();
        let p = BarrierParams::new(a.lambda.unwrap_or(16.0), a.c0.unwrap_or(DEFAULT_C0))?;
        (Source::Barrier(BoxUnion::single(b), p), d)
    };
    let defaults = SliceSpec::default();
    let vary = a.vary.clone().unwrap_or(vec![defaults.vary_dims.0, defaults.vary_dims.1]);
    let window = a.window.clone().unwrap_or(vec![defaults.window.0, defaults.window.1]);
    if vary.len() != 2 {
        return Err(invalid("vary", format!("expected two coordinates, got {}", vary.len())));
    }
    if window.len() != 2 {
        return Err(invalid("window", format!("expected two values, got {}", window.len())));
    }
    let spec = SliceSpec {
        vary_dims: (vary[0], vary[1]),
        fixed_values: a.fixed.clone().unwrap_or_default(),
        side: a.side.unwrap_or(defaults.side),
        window: (window[0], window[1]),
    };
    let grid = slice_grid(&spec, d)?;
    let values: Vec<f64> = match &source {
        Source::Model(m) => m.predict(&grid)?,
        Source::Tree(t) => grid.iter_rows().map(|r| f64::from(t.predict(r))).collect(),
        Source::Barrier(u, p) => grid.iter_rows().map(|r| score_union(u, p, r)).collect::<Result<_>>()?,
    };
    let out = ctx.out_dir()?;
    let (i, j) = spec.vary_dims;
    let mut csv = format!("x{i},x{j},value\n");
    for (r, v) in grid.iter_rows().zip(&values) {
        csv.push_str(&format!("{},{},{}\n", fmt9(r[i]), fmt9(r[j]), fmt9(*v)));
    }
    write(out, "slice.csv", csv)?;
    ctx.echo(out, "slice", &a)?;
    println!("{} grid points written to {}", values.len(), out.join("slice.csv").display());
    Ok(())
}
