//! Center-distance detection metrics in the style of the nuScenes benchmark.
//!
//! * Matching is per class and greedy: predictions in descending score order
//!   (ties: lower index first) take the nearest unmatched ground truth of the
//!   same frame and class whose BEV center distance is strictly below the
//!   threshold. Distance ties go to the lower ground-truth index.
//! * AP samples precision on the 101-point recall grid `0, 0.01, .., 1` by
//!   linear interpolation of the raw PR points, with precision 0 beyond the
//!   highest recall reached. With clipping on, grid points with recall at or
//!   below `min_recall` are dropped and the rest are rescaled as
//!   `max(p - min_precision, 0) / (1 - min_precision)` before averaging.
//! * TP errors use the matches at `tp_threshold` (2 m by default): ATE is the
//!   BEV center distance, ASE is `1 - IoU` of the boxes aligned on center and
//!   yaw, AOE is `|wrap(yaw_pred - yaw_gt)|`. A class with ground truth but
//!   no match gets error 1 for all three.
//! * Classes without ground truth are left out of every mean.
//! * NDS-3 is `(5 mAP + sum over ATE, ASE, AOE of (1 - min(1, err))) / 8`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, OrientedBox3D};
use crate::nms::ScoredBox;
use crate::scene::{FramePredictions, LabeledBox, Scene};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame_id: String,
    pub det: ScoredBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub frame_id: String,
    pub gt: LabeledBox,
}

/// Outcome for one prediction, in the order matching visited them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetMatch {
    pub pred: usize,
    pub score: f64,
    pub gt: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub dist_thresholds: Vec<f64>,
    pub tp_threshold: f64,
    pub clip: bool,
    pub min_recall: f64,
    pub min_precision: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            dist_thresholds: vec![0.5, 1.0, 2.0, 4.0],
            tp_threshold: 2.0,
            clip: true,
            min_recall: 0.1,
            min_precision: 0.1,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dist_thresholds.is_empty() || self.dist_thresholds.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParams("distance thresholds must be positive and finite".into()));
        }
        if !(self.tp_threshold > 0.0 && self.tp_threshold.is_finite()) {
            return Err(Error::InvalidParams("tp threshold must be positive and finite".into()));
        }
        if !(0.0..1.0).contains(&self.min_recall) || !(0.0..1.0).contains(&self.min_precision) {
            return Err(Error::InvalidParams("clip floors must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpErrors {
    pub ate: f64,
    pub ase: f64,
    pub aoe: f64,
}

impl TpErrors {
    pub const SATURATED: TpErrors = TpErrors { ate: 1.0, ase: 1.0, aoe: 1.0 };
    pub const ZERO: TpErrors = TpErrors { ate: 0.0, ase: 0.0, aoe: 0.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: u16,
    pub name: String,
    pub num_gt: usize,
    pub num_pred: usize,
    /// One entry per distance threshold.
    pub ap: Vec<f64>,
    /// Matched pairs per distance threshold.
    pub matched: Vec<usize>,
    pub mean_ap: f64,
    pub tp_errors: TpErrors,
    pub tp_matches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dist_thresholds: Vec<f64>,
    pub classes: Vec<ClassReport>,
    pub map: f64,
    pub mate: f64,
    pub mase: f64,
    pub maoe: f64,
    pub nds3: f64,
    pub matched_pairs: Vec<usize>,
}

/// Mean that is exact when all inputs are equal.
fn running_mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut m = 0.0;
    let mut n = 0usize;
    for x in xs {
        n += 1;
        m += (x - m) / n as f64;
    }
    (n > 0).then_some(m)
}

fn bev_distance(a: &OrientedBox3D, b: &OrientedBox3D) -> f64 {
    a.center_bev().distance(b.center_bev())
}

fn frame_index(gts: &[GroundTruthRecord]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for g in gts {
        let n = m.len();
        m.entry(g.frame_id.as_str()).or_insert(n);
    }
    m
}

/// Greedy center-distance matching of the predictions of `class_id`.
pub fn match_detections(
    preds: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    class_id: u16,
    dist_threshold: f64,
) -> Vec<DetMatch> {
    let frames = frame_index(gts);
    let mut pools: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, g) in gts.iter().enumerate().filter(|(_, g)| g.gt.class_id == class_id) {
        pools.entry(frames[g.frame_id.as_str()]).or_default().push(i);
    }
    let mut taken = vec![false; gts.len()];
    let mut order: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].det.class_id == class_id).collect();
    order.sort_by(|&a, &b| preds[b].det.score.total_cmp(&preds[a].det.score).then(a.cmp(&b)));
    order
        .into_iter()
        .map(|p| {
            let pool = frames.get(preds[p].frame_id.as_str()).and_then(|f| pools.get(f));
            let mut best: Option<(f64, usize)> = None;
            for &g in pool.into_iter().flatten() {
                if taken[g] {
                    continue;
                }
                let d = bev_distance(&preds[p].det.bbox, &gts[g].gt.bbox);
                if d < dist_threshold && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, g));
                }
            }
            if let Some((_, g)) = best {
                taken[g] = true;
            }
            DetMatch { pred: p, score: preds[p].det.score, gt: best.map(|(_, g)| g) }
        })
        .collect()
}

pub const RECALL_GRID_POINTS: usize = 101;

/// Precision sampled on the 101-point recall grid.
pub fn interpolated_precision(matches: &[DetMatch], num_gt: usize) -> Vec<f64> {
    let mut recall = Vec::with_capacity(matches.len());
    let mut precision = Vec::with_capacity(matches.len());
    let mut tp = 0usize;
    for (k, m) in matches.iter().enumerate() {
        tp += usize::from(m.gt.is_some());
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    (0..RECALL_GRID_POINTS)
        .map(|i| {
            let r = i as f64 / (RECALL_GRID_POINTS - 1) as f64;
            if recall.is_empty() || r > recall[recall.len() - 1] {
                0.0
            } else if r <= recall[0] {
                precision[0]
            } else {
                let j = recall.partition_point(|&x| x < r);
                let t = (r - recall[j - 1]) / (recall[j] - recall[j - 1]);
                precision[j - 1] + t * (precision[j] - precision[j - 1])
            }
        })
        .collect()
}

/// AP of one class at one threshold; `matches` as returned by [`match_detections`].
pub fn average_precision(matches: &[DetMatch], num_gt: usize, cfg: &EvalConfig) -> f64 {
    if num_gt == 0 || matches.is_empty() {
        return 0.0;
    }
    let grid = interpolated_precision(matches, num_gt);
    let ap = if cfg.clip {
        let first = (cfg.min_recall * (RECALL_GRID_POINTS - 1) as f64).round() as usize + 1;
        running_mean(grid[first..].iter().map(|p| (p - cfg.min_precision).max(0.0) / (1.0 - cfg.min_precision)))
    } else {
        running_mean(grid.iter().copied())
    };
    ap.unwrap_or(0.0).clamp(0.0, 1.0)
}

/// `1 - IoU` of two boxes moved onto a common center and heading.
pub fn aligned_scale_error(pred: &OrientedBox3D, gt: &OrientedBox3D) -> f64 {
    let inter = pred.w.min(gt.w) * pred.l.min(gt.l) * pred.h.min(gt.h);
    let union = pred.volume() + gt.volume() - inter;
    (1.0 - inter / union).clamp(0.0, 1.0)
}

pub fn orientation_error(pred: &OrientedBox3D, gt: &OrientedBox3D) -> f64 {
    wrap_angle(pred.theta - gt.theta).abs()
}

/// Mean TP errors over the matched pairs; `None` without matches.
pub fn tp_errors(matches: &[DetMatch], preds: &[DetectionRecord], gts: &[GroundTruthRecord]) -> Option<TpErrors> {
    let pairs: Vec<_> =
        matches.iter().filter_map(|m| m.gt.map(|g| (&preds[m.pred].det.bbox, &gts[g].gt.bbox))).collect();
    Some(TpErrors {
        ate: running_mean(pairs.iter().map(|(p, g)| bev_distance(p, g)))?,
        ase: running_mean(pairs.iter().map(|(p, g)| aligned_scale_error(p, g)))?,
        aoe: running_mean(pairs.iter().map(|(p, g)| orientation_error(p, g)))?,
    })
}

pub fn composite_score(map: f64, errors: &TpErrors) -> f64 {
    let tp: f64 = [errors.ate, errors.ase, errors.aoe].iter().map(|e| 1.0 - e.min(1.0)).sum();
    (5.0 * map + tp) / 8.0
}

pub fn evaluate_records(
    preds: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    classes: &[String],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let per_class: Vec<ClassReport> = (0..classes.len())
        .into_par_iter()
        .map(|c| {
            let class_id = c as u16;
            let num_gt = gts.iter().filter(|g| g.gt.class_id == class_id).count();
            let num_pred = preds.iter().filter(|p| p.det.class_id == class_id).count();
            let mut ap = Vec::new();
            let mut matched = Vec::new();
            for &t in &cfg.dist_thresholds {
                let m = match_detections(preds, gts, class_id, t);
                matched.push(m.iter().filter(|x| x.gt.is_some()).count());
                ap.push(average_precision(&m, num_gt, cfg));
            }
            let tp = match_detections(preds, gts, class_id, cfg.tp_threshold);
            let tp_matches = tp.iter().filter(|x| x.gt.is_some()).count();
            let tp_errors = tp_errors(&tp, preds, gts).unwrap_or(TpErrors::SATURATED);
            ClassReport {
                class_id,
                name: classes[c].clone(),
                num_gt,
                num_pred,
                mean_ap: running_mean(ap.iter().copied()).unwrap_or(0.0),
                ap,
                matched,
                tp_errors,
                tp_matches,
            }
        })
        .collect();

    let scored: Vec<&ClassReport> = per_class.iter().filter(|c| c.num_gt > 0).collect();
    let map = running_mean(scored.iter().map(|c| c.mean_ap)).unwrap_or(0.0);
    let errors = TpErrors {
        ate: running_mean(scored.iter().map(|c| c.tp_errors.ate)).unwrap_or(1.0),
        ase: running_mean(scored.iter().map(|c| c.tp_errors.ase)).unwrap_or(1.0),
        aoe: running_mean(scored.iter().map(|c| c.tp_errors.aoe)).unwrap_or(1.0),
    };
    let matched_pairs = (0..cfg.dist_thresholds.len()).map(|k| per_class.iter().map(|c| c.matched[k]).sum()).collect();
    Ok(EvalReport {
        dist_thresholds: cfg.dist_thresholds.clone(),
        map,
        mate: errors.ate,
        mase: errors.ase,
        maoe: errors.aoe,
        nds3: composite_score(map, &errors),
        classes: per_class,
        matched_pairs,
    })
}

/// Flattens frames into records after checking both sides cover the same frames.
pub fn evaluate(gts: &[Scene], preds: &[FramePredictions], classes: &[String], cfg: &EvalConfig) -> Result<EvalReport> {
    let mut gt_ids: Vec<&str> = gts.iter().map(|s| s.frame_id.as_str()).collect();
    let mut pred_ids: Vec<&str> = preds.iter().map(|p| p.frame_id.as_str()).collect();
    gt_ids.sort_unstable();
    pred_ids.sort_unstable();
    if let Some(w) = gt_ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::FrameMismatch(format!("duplicate ground-truth frame `{}`", w[0])));
    }
    if let Some(w) = pred_ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::FrameMismatch(format!("duplicate prediction frame `{}`", w[0])));
    }
    if gt_ids != pred_ids {
        let missing = gt_ids.iter().find(|f| pred_ids.binary_search(f).is_err());
        let extra = pred_ids.iter().find(|f| gt_ids.binary_search(f).is_err());
        return Err(Error::FrameMismatch(match (missing, extra) {
            (Some(f), _) => format!("frame `{f}` has ground truth but no prediction entry"),
            (_, Some(f)) => format!("predictions reference unknown frame `{f}`"),
            _ => "frame sets differ".into(),
        }));
    }
    let check = |c: u16| {
        if (c as usize) < classes.len() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("class id {c} outside class table")))
        }
    };
    let mut gt_records = Vec::new();
    for s in gts {
        for b in &s.boxes {
            check(b.class_id)?;
            gt_records.push(GroundTruthRecord { frame_id: s.frame_id.clone(), gt: *b });
        }
    }
    let mut pred_records = Vec::new();
    for p in preds {
        for d in &p.detections {
            check(d.class_id)?;
            pred_records.push(DetectionRecord { frame_id: p.frame_id.clone(), det: *d });
        }
    }
    evaluate_records(&pred_records, &gt_records, classes, cfg)
}
