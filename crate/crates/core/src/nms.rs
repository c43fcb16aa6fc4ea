//! Greedy non-maximum suppression over scored boxes.
//!
//! Detections are visited in descending score order (ties: lower input index
//! first). A detection is suppressed when its overlap with an already kept
//! detection is strictly greater than the threshold, so pairs exactly at the
//! threshold both survive.

use serde::{Deserialize, Serialize};

use crate::geom::{box_aabb, OrientedBox3D};
use crate::overlap::{iou_aabb, iou_rotated_bev};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "box")]
    pub bbox: OrientedBox3D,
    pub score: f64,
    pub class_id: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmsMode {
    /// IoU of the encapsulating axis-aligned boxes.
    Standard,
    /// IoU of the rotated BEV footprints.
    Rotated,
}

/// Indices sorted by descending score, ties by ascending index.
pub fn score_order(dets: &[ScoredBox]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    order
}

fn greedy<F>(dets: &[ScoredBox], iou_threshold: f64, class_aware: bool, overlap: F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    let order = score_order(dets);
    let mut suppressed = vec![false; dets.len()];
    let mut keep = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        for &j in &order[rank + 1..] {
            if suppressed[j] || (class_aware && dets[i].class_id != dets[j].class_id) {
                continue;
            }
            if overlap(i, j) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    keep
}

pub fn nms_standard(dets: &[ScoredBox], iou_threshold: f64, class_aware: bool) -> Vec<usize> {
    let aabbs: Vec<_> = dets.iter().map(|d| box_aabb(&d.bbox)).collect();
    greedy(dets, iou_threshold, class_aware, |i, j| iou_aabb(&aabbs[i], &aabbs[j]).iou)
}

pub fn nms_rotated(dets: &[ScoredBox], iou_threshold: f64, class_aware: bool) -> Vec<usize> {
    greedy(dets, iou_threshold, class_aware, |i, j| iou_rotated_bev(&dets[i].bbox, &dets[j].bbox).iou)
}

pub fn nms(dets: &[ScoredBox], mode: NmsMode, iou_threshold: f64, class_aware: bool) -> Vec<usize> {
    match mode {
        NmsMode::Standard => nms_standard(dets, iou_threshold, class_aware),
        NmsMode::Rotated => nms_rotated(dets, iou_threshold, class_aware),
    }
}
