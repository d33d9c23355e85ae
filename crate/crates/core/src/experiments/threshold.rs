use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// `TP / (TP + FP + FN)`; 1 when all three counts are zero.
pub fn iou(pred: &[bool], truth: &[bool]) -> Result<f64> {
    check_dim(truth.len(), pred.len())?;
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            _ => {}
        }
    }
    let denom = tp + fp + fnn;
    Ok(if denom == 0 { 1.0 } else { tp as f64 / denom as f64 })
}

/// IoU of `{logit ≥ tau}` against the labels.
pub fn iou_at(logits: &[f64], truth: &[bool], tau: f64) -> Result<f64> {
    let pred: Vec<bool> = logits.iter().map(|l| *l >= tau).collect();
    iou(&pred, truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    Fixed { tau: f64 },
    /// Uniform grid of `grid` thresholds spanning the validation logits.
    Optimized { grid: usize },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Optimized { grid: 201 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub tau: f64,
    pub val_iou: f64,
}

/// Tie-break rule recorded with every optimised threshold.
pub const TIE_BREAK: &str = "smallest tau among grid points attaining the maximum validation IoU";

/// Picks the threshold maximising validation IoU over the policy's grid.
///
/// Candidates are scored in one pass over the logits sorted in decreasing
/// order, so the cost is `O(n log n + grid)`.
pub fn optimize_threshold(logits: &[f64], labels: &[bool], policy: &ThresholdPolicy) -> Result<ThresholdChoice> {
    check_dim(labels.len(), logits.len())?;
    if logits.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid("logits", "must be finite"));
    }
    let grid = match *policy {
        ThresholdPolicy::Fixed { tau } => {
            return Ok(ThresholdChoice { tau, val_iou: iou_at(logits, labels, tau)? });
        }
        ThresholdPolicy::Optimized { grid } if grid >= 2 => grid,
        ThresholdPolicy::Optimized { .. } => return Err(Error::invalid("grid", "need at least 2 thresholds")),
    };
    let lo = logits.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let taus: Vec<f64> = (0..grid)
        .map(|i| if i + 1 == grid { hi } else { lo + (hi - lo) * i as f64 / (grid - 1) as f64 })
        .collect();

    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]));
    let total_pos = labels.iter().filter(|l| **l).count();
    // Walk thresholds from the top; `k` points with logit ≥ tau are predicted positive.
    let (mut k, mut tp) = (0usize, 0usize);
    let mut scores = vec![0.0; grid];
    for (gi, &tau) in taus.iter().enumerate().rev() {
        while k < order.len() && logits[order[k]] >= tau {
            if labels[order[k]] {
                tp += 1;
            }
            k += 1;
        }
        let fp = k - tp;
        let fnn = total_pos - tp;
        let denom = tp + fp + fnn;
        scores[gi] = if denom == 0 { 1.0 } else { tp as f64 / denom as f64 };
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(ThresholdChoice { tau: taus[best], val_iou: scores[best] })
}
