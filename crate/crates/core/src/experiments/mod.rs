//! Width sweeps with IoU evaluation, MSE-target frontiers, and barrier
//! calibration ladders, plus their on-disk run layout.

mod calibration;
mod frontier;
mod sweep;
mod threshold;

pub use calibration::{barrier_sweep, geometric_ladder, BarrierSweep};
pub use frontier::{frontier_report, FrontierReport, FrontierRow};
pub use sweep::{width_sweep, CellResult, ExperimentRun, SweepConfig, WidthSummary};
pub use threshold::{iou, iou_at, optimize_threshold, ThresholdChoice, ThresholdPolicy, TIE_BREAK};
