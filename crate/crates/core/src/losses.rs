//! Detection-head losses with analytic gradients.
//!
//! Each scalar loss returns `(loss, d loss / d prediction)`. Reductions go
//! through [`pairwise_sum`] so totals do not depend on thread count.

use serde::{Deserialize, Serialize};

use crate::assign::{Ltrb, TargetMap};
use crate::codec::KEYPOINT_CHANNELS;
use crate::error::{Error, Result};
use crate::geom::Aabb2D;
use crate::overlap::iou_aabb;

/// Probability clamp for focal and BCE.
pub const PROB_EPS: f64 = 1e-7;

/// Fixed-order pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if xs.len() <= BLOCK {
        return xs.iter().fold(0.0, |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn clamp_prob(p: f64) -> (f64, bool) {
    let c = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    (c, c != p)
}

/// Sigmoid focal loss on a probability, with `alpha` weighting positives and
/// `1 − alpha` negatives.
pub fn focal_loss(p: f64, positive: bool, alpha: f64, gamma: f64) -> (f64, f64) {
    let (p, clamped) = clamp_prob(p);
    let (loss, grad) = if positive {
        let q = 1.0 - p;
        let loss = -alpha * q.powf(gamma) * p.ln();
        let grad = alpha * gamma * q.powf(gamma - 1.0) * p.ln() - alpha * q.powf(gamma) / p;
        (loss, grad)
    } else {
        let a = 1.0 - alpha;
        let q = 1.0 - p;
        let loss = -a * p.powf(gamma) * q.ln();
        let grad = -a * (gamma * p.powf(gamma - 1.0) * q.ln() - p.powf(gamma) / q);
        (loss, grad)
    };
    (loss, if clamped { 0.0 } else { grad })
}

/// Binary cross-entropy against a soft label `y` in [0, 1].
pub fn bce_loss(p: f64, y: f64) -> (f64, f64) {
    let (p, clamped) = clamp_prob(p);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let grad = (p - y) / (p * (1.0 - p));
    (loss, if clamped { 0.0 } else { grad })
}

/// Smooth L1 with transition width `beta`. With `relu`, the prediction first
/// passes through `max(0, ·)`.
pub fn smooth_l1(pred: f64, target: f64, beta: f64, relu: bool) -> (f64, f64) {
    let x = if relu { pred.max(0.0) } else { pred };
    let d = x - target;
    let (loss, dx) = if d.abs() < beta { (0.5 * d * d / beta, d / beta) } else { (d.abs() - 0.5 * beta, d.signum()) };
    let grad = if relu && pred <= 0.0 { 0.0 } else { dx };
    (loss, grad)
}

/// `1 − GIoU` and its gradient with respect to `(x_min, y_min, x_max, y_max)`
/// of the prediction.
pub fn giou_loss(pred: &Aabb2D, target: &Aabb2D) -> (f64, [f64; 4]) {
    let r = iou_aabb(pred, target);
    let loss = 1.0 - r.giou;
    let [x1, y1, x2, y2] = pred.as_array();
    let [gx1, gy1, gx2, gy2] = target.as_array();
    let (pw, ph) = (x2 - x1, y2 - y1);
    let iw = (x2.min(gx2) - x1.max(gx1)).max(0.0);
    let ih = (y2.min(gy2) - y1.max(gy1)).max(0.0);
    let cw = x2.max(gx2) - x1.min(gx1);
    let ch = y2.max(gy2) - y1.min(gy1);
    let (i, u, c) = (r.intersection, r.union, cw * ch);
    if !(pw > 0.0 && ph > 0.0 && u > 0.0 && c > 0.0) {
        return (loss, [0.0; 4]);
    }

    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    let d_area = [-ph, -pw, ph, pw];
    let d_inter = if iw > 0.0 && ih > 0.0 {
        [-ih * ind(x1 > gx1), -iw * ind(y1 > gy1), ih * ind(x2 < gx2), iw * ind(y2 < gy2)]
    } else {
        [0.0; 4]
    };
    let d_hull = [-ch * ind(x1 < gx1), -cw * ind(y1 < gy1), ch * ind(x2 > gx2), cw * ind(y2 > gy2)];

    // loss = 2 − I/U − U/C
    let mut grad = [0.0; 4];
    for k in 0..4 {
        let du = d_area[k] - d_inter[k];
        grad[k] = -(d_inter[k] * u - i * du) / (u * u) - (du * c - u * d_hull[k]) / (c * c);
    }
    (loss, grad)
}

/// Focal-loss terms of one class channel and its positive count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassLossGroup {
    pub losses: Vec<f64>,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationLoss {
    pub total: f64,
    pub per_class: Vec<f64>,
}

/// Sums each class's losses, divides by `max(1, positives)`, then sums the
/// per-class values.
pub fn class_normalized_classification_loss(groups: &[ClassLossGroup]) -> ClassificationLoss {
    let per_class: Vec<f64> = groups.iter().map(|g| pairwise_sum(&g.losses) / g.positives.max(1) as f64).collect();
    ClassificationLoss { total: pairwise_sum(&per_class), per_class }
}

/// Regression-type loss terms of a single cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellLossTerms {
    pub bbox: f64,
    pub keypoint: f64,
    pub centerness: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FilteredLosses {
    pub bbox: f64,
    pub keypoint: f64,
    pub centerness: f64,
    pub cells: usize,
}

/// Means of the regression terms over the cells whose mask is set. An empty
/// mask yields exactly zero.
pub fn objectness_filter(terms: &[CellLossTerms], mask: &[bool]) -> Result<FilteredLosses> {
    if terms.len() != mask.len() {
        return Err(Error::InvalidParams(format!(
            "loss terms ({}) and objectness mask ({}) differ in length",
            terms.len(),
            mask.len()
        )));
    }
    let picked: Vec<&CellLossTerms> = terms.iter().zip(mask).filter(|(_, m)| **m).map(|(t, _)| t).collect();
    let n = picked.len();
    if n == 0 {
        return Ok(FilteredLosses::default());
    }
    let mean = |f: fn(&CellLossTerms) -> f64| pairwise_sum(&picked.iter().map(|t| f(t)).collect::<Vec<_>>()) / n as f64;
    Ok(FilteredLosses {
        bbox: mean(|t| t.bbox),
        keypoint: mean(|t| t.keypoint),
        centerness: mean(|t| t.centerness),
        cells: n,
    })
}

/// Network outputs for one BEV cell, already passed through their
/// activations (probabilities for class/centerness/objectness).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPrediction {
    pub class_probs: Vec<f64>,
    pub centerness: f64,
    pub ltrb: Ltrb,
    pub keypoints: [f64; KEYPOINT_CHANNELS],
    pub objectness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Gate on ground-truth objectness labels.
    Labels,
    /// Gate on predicted objectness above 0.5 (cells must still carry a target).
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub filter: FilterMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { alpha: 0.25, gamma: 2.0, beta: 1.0, filter: FilterMode::Labels }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub classification: f64,
    pub per_class_classification: Vec<f64>,
    pub centerness: f64,
    pub bbox_giou: f64,
    pub keypoint_smooth_l1: f64,
    pub objectness: f64,
    pub filtered_cells: usize,
}

/// Smooth L1 summed over the keypoint channels; ReLU on `u` and `v` only.
pub fn keypoint_loss(
    pred: &[f64; KEYPOINT_CHANNELS],
    target: &[f64; KEYPOINT_CHANNELS],
    beta: f64,
) -> (f64, [f64; KEYPOINT_CHANNELS]) {
    let mut grad = [0.0; KEYPOINT_CHANNELS];
    let mut terms = [0.0; KEYPOINT_CHANNELS];
    for k in 0..KEYPOINT_CHANNELS {
        let (l, g) = smooth_l1(pred[k], target[k], beta, k < 2);
        terms[k] = l;
        grad[k] = g;
    }
    (pairwise_sum(&terms), grad)
}

pub fn compute_losses(
    preds: &[CellPrediction],
    targets: &TargetMap,
    num_classes: usize,
    cfg: &LossConfig,
) -> Result<LossReport> {
    if preds.len() != targets.cells.len() {
        return Err(Error::InvalidParams(format!(
            "{} predictions for {} grid cells",
            preds.len(),
            targets.cells.len()
        )));
    }
    if let Some(p) = preds.iter().find(|p| p.class_probs.len() != num_classes) {
        return Err(Error::InvalidParams(format!(
            "expected {num_classes} class probabilities, got {}",
            p.class_probs.len()
        )));
    }

    let groups: Vec<ClassLossGroup> = (0..num_classes)
        .map(|k| {
            let mut g = ClassLossGroup::default();
            for (i, p) in preds.iter().enumerate() {
                let positive = targets.class_label(i) == Some(k as u16);
                g.positives += positive as usize;
                g.losses.push(focal_loss(p.class_probs[k], positive, cfg.alpha, cfg.gamma).0);
            }
            g
        })
        .collect();
    let cls = class_normalized_classification_loss(&groups);

    let obj: Vec<f64> = preds
        .iter()
        .enumerate()
        .map(|(i, p)| bce_loss(p.objectness, f64::from(u8::from(targets.objectness(i)))).0)
        .collect();
    let objectness = if obj.is_empty() { 0.0 } else { pairwise_sum(&obj) / obj.len() as f64 };

    let mut terms = Vec::with_capacity(preds.len());
    let mut mask = Vec::with_capacity(preds.len());
    for (i, p) in preds.iter().enumerate() {
        let Some(t) = &targets.cells[i] else {
            terms.push(CellLossTerms::default());
            mask.push(false);
            continue;
        };
        let c = targets.cell_center(i);
        terms.push(CellLossTerms {
            bbox: giou_loss(&p.ltrb.to_aabb(c), &t.ltrb.to_aabb(c)).0,
            keypoint: keypoint_loss(&p.keypoints, &t.keypoints, cfg.beta).0,
            centerness: bce_loss(p.centerness, t.centerness).0,
        });
        mask.push(match cfg.filter {
            FilterMode::Labels => true,
            FilterMode::Predicted => p.objectness > 0.5,
        });
    }
    let filtered = objectness_filter(&terms, &mask)?;

    Ok(LossReport {
        classification: cls.total,
        per_class_classification: cls.per_class,
        centerness: filtered.centerness,
        bbox_giou: filtered.bbox,
        keypoint_smooth_l1: filtered.keypoint,
        objectness,
        filtered_cells: filtered.cells,
    })
}
