use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::threshold::{iou_at, optimize_threshold, ThresholdPolicy, TIE_BREAK};
use crate::datasets::{DatasetMetadata, GeneratedDataset};
use crate::error::{Error, Result};
use crate::fit::spearman;
use crate::fmt9;
use crate::nn::{init, rtv_proxy, train, MlpModel, TrainConfig, TrainTrace};
use crate::rng::{derive_seed, PRNG_ID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Shared hyperparameters; `width` and `seed` are overwritten per cell.
    pub train: TrainConfig,
    pub threshold: ThresholdPolicy,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            widths: vec![8, 16, 32, 64, 128, 256],
            seeds: vec![0, 1, 2],
            train: TrainConfig::default(),
            threshold: ThresholdPolicy::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::invalid("widths", "need at least one positive width"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "need at least one seed"));
        }
        self.train.validate()
    }
}

/// One trained network of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub width: usize,
    pub seed: u64,
    /// Seed passed to [`init`].
    pub init_seed: u64,
    pub tau_star: f64,
    pub test_iou_tau0: f64,
    pub test_iou_tau_star: f64,
    pub val_iou_tau0: f64,
    pub val_iou_tau_star: f64,
    pub rtv_proxy: f64,
    pub test_mse: f64,
    pub epochs_run: usize,
    pub trace: TrainTrace,
    pub model: MlpModel,
}

impl CellResult {
    pub fn trace_file(&self) -> String {
        format!("traces/w{}_s{}.csv", self.width, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthSummary {
    pub width: usize,
    pub seeds: usize,
    pub mean_test_iou_tau0: f64,
    pub mean_test_iou_tau_star: f64,
    pub mean_rtv_proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub config: SweepConfig,
    pub dataset: DatasetMetadata,
    /// Ordered by width, then seed, as listed in the config.
    pub cells: Vec<CellResult>,
    pub summary: Vec<WidthSummary>,
    /// Spearman correlation of width against the seed-mean final proxy.
    pub spearman_width_proxy: Option<f64>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn run_cell(data: &GeneratedDataset, cfg: &SweepConfig, width: usize, seed: u64) -> Result<CellResult> {
    let d = data.spec.d;
    let init_seed = derive_seed(seed, width as u64);
    let tc = TrainConfig { width, seed, ..cfg.train.clone() };
    let out = train(init(d, width, init_seed)?, &data.train, &data.val, Some(&data.test), &tc).map_err(|e| match e {
        Error::TrainingDiverged { epoch, detail } => {
            Error::TrainingDiverged { epoch, detail: format!("width {width}, seed {seed}: {detail}") }
        }
        other => other,
    })?;
    let val_truth: Vec<bool> = data.val.y.iter().map(|y| *y == 1.0).collect();
    let test_truth: Vec<bool> = data.test.y.iter().map(|y| *y == 1.0).collect();
    let val_logits = out.model.predict(&data.val.x)?;
    let test_logits = out.model.predict(&data.test.x)?;
    let choice = optimize_threshold(&val_logits, &val_truth, &cfg.threshold)?;
    let last = *out.trace.last();
    Ok(CellResult {
        width,
        seed,
        init_seed,
        tau_star: choice.tau,
        test_iou_tau0: iou_at(&test_logits, &test_truth, 0.0)?,
        test_iou_tau_star: iou_at(&test_logits, &test_truth, choice.tau)?,
        val_iou_tau0: iou_at(&val_logits, &val_truth, 0.0)?,
        val_iou_tau_star: choice.val_iou,
        rtv_proxy: rtv_proxy(&out.model),
        test_mse: last.test_mse.unwrap_or(f64::NAN),
        epochs_run: last.epoch,
        trace: out.trace,
        model: out.model,
    })
}

/// Trains every (width, seed) cell and evaluates IoU at `τ = 0` and at the
/// validation-optimised `τ*` on the test split.
///
/// Cells run on a pool of at most `jobs` threads (all cores when `None`);
/// results are assembled in config order, so the output does not depend on
/// scheduling.
pub fn width_sweep(data: &GeneratedDataset, cfg: &SweepConfig, jobs: Option<usize>) -> Result<ExperimentRun> {
    cfg.validate()?;
    let started_unix = now();
    let cells: Vec<(usize, u64)> =
        cfg.widths.iter().flat_map(|&w| cfg.seeds.iter().map(move |&s| (w, s))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| Error::invalid("jobs", e.to_string()))?;
    let results: Vec<CellResult> =
        pool.install(|| cells.par_iter().map(|&(w, s)| run_cell(data, cfg, w, s)).collect::<Result<_>>())?;

    let summary: Vec<WidthSummary> = cfg
        .widths
        .iter()
        .map(|&w| {
            let rows: Vec<&CellResult> = results.iter().filter(|c| c.width == w).collect();
            let n = rows.len() as f64;
            WidthSummary {
                width: w,
                seeds: rows.len(),
                mean_test_iou_tau0: rows.iter().map(|c| c.test_iou_tau0).sum::<f64>() / n,
                mean_test_iou_tau_star: rows.iter().map(|c| c.test_iou_tau_star).sum::<f64>() / n,
                mean_rtv_proxy: rows.iter().map(|c| c.rtv_proxy).sum::<f64>() / n,
            }
        })
        .collect();
    let xs: Vec<f64> = summary.iter().map(|s| s.width as f64).collect();
    let ys: Vec<f64> = summary.iter().map(|s| s.mean_rtv_proxy).collect();
    let spearman_width_proxy = if xs.len() >= 2 { spearman(&xs, &ys).ok() } else { None };
    Ok(ExperimentRun {
        config: cfg.clone(),
        dataset: data.metadata(),
        cells: results,
        summary,
        spearman_width_proxy,
        started_unix,
        finished_unix: now(),
    })
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    prng: &'a str,
    seeds: &'a [u64],
    init_seed_rule: &'a str,
    shuffle_seed_rule: &'a str,
    threshold_policy: &'a ThresholdPolicy,
    threshold_tie_break: &'a str,
    iou_degenerate_case: &'a str,
    crossing_split: &'a str,
    summary: &'a [WidthSummary],
    spearman_width_proxy: Option<f64>,
    started_unix: u64,
    finished_unix: u64,
}

impl ExperimentRun {
    /// `width,seed,tau_star,test_iou_tau0,test_iou_tau_star,val_iou_tau0,val_iou_tau_star,rtv_proxy,test_mse,epochs,trace`.
    pub fn report_csv(&self) -> Result<String> {
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record([
            "width",
            "seed",
            "tau_star",
            "test_iou_tau0",
            "test_iou_tau_star",
            "val_iou_tau0",
            "val_iou_tau_star",
            "rtv_proxy",
            "test_mse",
            "epochs",
            "trace",
        ])?;
        for c in &self.cells {
            wr.write_record([
                c.width.to_string(),
                c.seed.to_string(),
                fmt9(c.tau_star),
                fmt9(c.test_iou_tau0),
                fmt9(c.test_iou_tau_star),
                fmt9(c.val_iou_tau0),
                fmt9(c.val_iou_tau_star),
                fmt9(c.rtv_proxy),
                fmt9(c.test_mse),
                c.epochs_run.to_string(),
                c.trace_file(),
            ])?;
        }
        let bytes = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `config.json`, `dataset.json`, `traces/*.csv`, `report.csv`,
    /// `frontier.csv` and `metadata.json`.
    pub fn write_dir(&self, dir: &Path, dataset_ref: Option<&Path>) -> Result<()> {
        fs::create_dir_all(dir.join("traces"))?;
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)?)?;
        let dataset = serde_json::json!({
            "path": dataset_ref.map(|p| p.display().to_string()),
            "metadata": self.dataset,
        });
        fs::write(dir.join("dataset.json"), serde_json::to_string_pretty(&dataset)?)?;
        for c in &self.cells {
            c.trace.write_csv(fs::File::create(dir.join(c.trace_file()))?)?;
        }
        fs::write(dir.join("report.csv"), self.report_csv()?)?;
        fs::write(dir.join("frontier.csv"), super::frontier_report(self).to_csv()?)?;
        let crossing = self.cells.first().map_or("test", |c| c.trace.crossing_split.as_str());
        let meta = RunMetadata {
            prng: PRNG_ID,
            seeds: &self.config.seeds,
            init_seed_rule: "init_seed = derive_seed(seed, width)",
            shuffle_seed_rule: "epoch e (1-based) shuffles with derive_seed(seed, e)",
            threshold_policy: &self.config.threshold,
            threshold_tie_break: TIE_BREAK,
            iou_degenerate_case: "IoU = 1 when TP = FP = FN = 0",
            crossing_split: crossing,
            summary: &self.summary,
            spearman_width_proxy: self.spearman_width_proxy,
            started_unix: self.started_unix,
            finished_unix: self.finished_unix,
        };
        fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
        fs::write(dir.join("run.json"), serde_json::to_string(self)?)?;
        Ok(())
    }

    /// Loads the `run.json` written by [`write_dir`](Self::write_dir).
    pub fn read_dir(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join("run.json"))?)?)
    }
}
