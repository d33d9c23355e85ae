use serde::{Deserialize, Serialize};

use super::sweep::ExperimentRun;
use crate::error::Result;
use crate::fmt9;

/// Mean proxy over the seeds that crossed `target_mse`, per width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub width: usize,
    pub target_mse: f64,
    pub first_cross_epoch: f64,
    pub rtv_proxy_at_cross: f64,
    pub seeds_crossed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierReport {
    pub rows: Vec<FrontierRow>,
    /// Set when no seed crossed any target.
    pub warning: Option<String>,
}

/// Per (width, target) averages at the first crossing epoch.
///
/// Targets keep the order of the training config. A (width, target) pair
/// that no seed crossed produces no row.
pub fn frontier_report(run: &ExperimentRun) -> FrontierReport {
    let mut rows = Vec::new();
    for &w in &run.config.widths {
        for (ti, &target) in run.config.train.mse_targets.iter().enumerate() {
            let hits: Vec<(usize, f64)> = run
                .cells
                .iter()
                .filter(|c| c.width == w)
                .filter_map(|c| {
                    let x = c.trace.crossings.get(ti)?;
                    Some((x.epoch?, x.rtv_proxy?))
                })
                .collect();
            if hits.is_empty() {
                continue;
            }
            let n = hits.len() as f64;
            rows.push(FrontierRow {
                width: w,
                target_mse: target,
                first_cross_epoch: hits.iter().map(|h| h.0 as f64).sum::<f64>() / n,
                rtv_proxy_at_cross: hits.iter().map(|h| h.1).sum::<f64>() / n,
                seeds_crossed: hits.len(),
            });
        }
    }
    let warning = rows.is_empty().then(|| "no seed crossed any MSE target; frontier is empty".to_string());
    FrontierReport { rows, warning }
}

impl FrontierReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(["width", "target_mse", "first_cross_epoch", "rtv_proxy_at_cross", "seeds_crossed"])?;
        for r in &self.rows {
            wr.write_record([
                r.width.to_string(),
                fmt9(r.target_mse),
                fmt9(r.first_cross_epoch),
                fmt9(r.rtv_proxy_at_cross),
                r.seeds_crossed.to_string(),
            ])?;
        }
        let bytes = wr.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
