//! FCOS-style per-cell target assignment on the BEV grid.
//!
//! Every box contributes one foreground region: the grid cells whose centers
//! fall inside its encapsulating AABB (boundary included). A single size
//! range is used, so there is no level partitioning. When regions overlap,
//! the box with the smaller AABB area owns the cell; equal areas go to the
//! lower box index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{encode, Rqr3dTargets, KEYPOINT_CHANNELS};
use crate::error::{Error, Result};
use crate::geom::{Aabb2D, OrientedBox3D, Vec2};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BevGridSpec {
    pub cells_per_side: usize,
    pub meters_per_cell: f64,
    /// World coordinate of the outer corner of cell (0, 0).
    pub origin: Vec2,
}

impl BevGridSpec {
    pub fn new(cells_per_side: usize, meters_per_cell: f64, origin: Vec2) -> Result<Self> {
        if cells_per_side == 0 {
            return Err(Error::InvalidParams("grid needs at least one cell per side".into()));
        }
        if !(meters_per_cell > 0.0 && meters_per_cell.is_finite()) || !origin.is_finite() {
            return Err(Error::InvalidParams(format!("invalid cell size {meters_per_cell}")));
        }
        Ok(Self { cells_per_side, meters_per_cell, origin })
    }

    /// A `2N x 2N` grid centered on the ego origin.
    pub fn centered(half_cells: usize, meters_per_cell: f64) -> Result<Self> {
        let half = half_cells as f64 * meters_per_cell;
        Self::new(2 * half_cells, meters_per_cell, Vec2::new(-half, -half))
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn side_length(&self) -> f64 {
        self.cells_per_side as f64 * self.meters_per_cell
    }

    pub fn extent(&self) -> Aabb2D {
        let s = self.side_length();
        Aabb2D::new(self.origin.x, self.origin.y, self.origin.x + s, self.origin.y + s)
    }

    /// Row-major linear index; `ix` runs along x.
    pub fn linear(&self, ix: usize, iy: usize) -> usize {
        iy * self.cells_per_side + ix
    }

    pub fn unlinear(&self, i: usize) -> (usize, usize) {
        (i % self.cells_per_side, i / self.cells_per_side)
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (ix as f64 + 0.5) * self.meters_per_cell,
            self.origin.y + (iy as f64 + 0.5) * self.meters_per_cell,
        )
    }

    fn axis_index(&self, coord: f64, origin: f64) -> Option<usize> {
        let k = ((coord - origin) / self.meters_per_cell).floor();
        (k >= 0.0 && k < self.cells_per_side as f64).then_some(k as usize)
    }

    /// `floor((p − origin) / cell)` per axis; `None` outside the grid,
    /// including points exactly on the far boundary.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        Some((self.axis_index(p.x, self.origin.x)?, self.axis_index(p.y, self.origin.y)?))
    }

    /// Inclusive range of cell indices along one axis whose centers may lie
    /// in `[lo, hi]`.
    fn center_range(&self, lo: f64, hi: f64, origin: f64) -> Option<(usize, usize)> {
        let n = self.cells_per_side as f64;
        let first = ((lo - origin) / self.meters_per_cell - 0.5).ceil().max(0.0) - 1.0;
        let last = ((hi - origin) / self.meters_per_cell - 0.5).floor().min(n - 1.0) + 1.0;
        let first = first.max(0.0);
        let last = last.min(n - 1.0);
        (first <= last).then_some((first as usize, last as usize))
    }
}

/// Distances from a cell center to the AABB edges, in (top, left, right,
/// bottom) order where top is the `y_min` side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ltrb {
    pub top: f64,
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
}

impl Ltrb {
    pub fn new(top: f64, left: f64, right: f64, bottom: f64) -> Self {
        Self { top, left, right, bottom }
    }

    pub fn from_cell(c: Vec2, a: &Aabb2D) -> Self {
        Self { top: c.y - a.y_min, left: c.x - a.x_min, right: a.x_max - c.x, bottom: a.y_max - c.y }
    }

    pub fn to_aabb(&self, c: Vec2) -> Aabb2D {
        Aabb2D::new(c.x - self.left, c.y - self.top, c.x + self.right, c.y + self.bottom)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.top, self.left, self.right, self.bottom]
    }
}

/// `sqrt(min(l,r)/max(l,r) * min(t,b)/max(t,b))`.
pub fn centerness(d: &Ltrb) -> Result<f64> {
    let all = d.as_array();
    if all.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParams(format!("ltrb must be non-negative, got {all:?}")));
    }
    let (lr_max, tb_max) = (d.left.max(d.right), d.top.max(d.bottom));
    if lr_max == 0.0 && tb_max == 0.0 {
        return Err(Error::DegenerateLtrb);
    }
    let ratio = |a: f64, b: f64, m: f64| if m > 0.0 { a.min(b) / m } else { 1.0 };
    Ok((ratio(d.left, d.right, lr_max) * ratio(d.top, d.bottom, tb_max)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTarget {
    pub class_id: u16,
    /// Index of the owning box in the scene.
    pub box_index: usize,
    pub ltrb: Ltrb,
    pub centerness: f64,
    pub keypoints: [f64; KEYPOINT_CHANNELS],
}

impl CellTarget {
    /// Rebuilds the full target bundle for a cell centered at `c`.
    pub fn targets_at(&self, c: Vec2) -> Rqr3dTargets {
        Rqr3dTargets::from_parts(self.ltrb.to_aabb(c), self.keypoints)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMap {
    pub spec: BevGridSpec,
    /// Row-major, `None` for background.
    pub cells: Vec<Option<CellTarget>>,
    /// Boxes whose center lies outside the grid.
    pub skipped_boxes: usize,
    /// The boxes as assigned (after size doubling).
    pub assigned_boxes: Vec<OrientedBox3D>,
}

impl TargetMap {
    pub fn objectness(&self, i: usize) -> bool {
        self.cells[i].is_some()
    }

    pub fn class_label(&self, i: usize) -> Option<u16> {
        self.cells[i].as_ref().map(|c| c.class_id)
    }

    pub fn one_hot(&self, i: usize, num_classes: usize) -> Vec<f64> {
        let mut v = vec![0.0; num_classes];
        if let Some(k) = self.class_label(i) {
            if (k as usize) < num_classes {
                v[k as usize] = 1.0;
            }
        }
        v
    }

    pub fn foreground_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn cell_center(&self, i: usize) -> Vec2 {
        let (ix, iy) = self.spec.unlinear(i);
        self.spec.cell_center(ix, iy)
    }
}

/// Scales the footprint of a box, leaving `h` alone.
pub fn scale_footprint(b: &OrientedBox3D, factor: f64) -> OrientedBox3D {
    OrientedBox3D { w: b.w * factor, l: b.l * factor, ..*b }
}

/// Undoes the training-time size doubling on a decoded box.
pub fn halve_sizes(b: &OrientedBox3D) -> OrientedBox3D {
    scale_footprint(b, 0.5)
}

/// `size_doubling` lists class ids whose ground-truth footprints are doubled
/// before assignment.
pub fn assign_targets(scene: &Scene, grid: &BevGridSpec, size_doubling: &[u16]) -> Result<TargetMap> {
    let extent = grid.extent();
    let mut owner: Vec<Option<(usize, f64)>> = vec![None; grid.num_cells()];
    let mut assigned = Vec::with_capacity(scene.boxes.len());
    let mut encoded = Vec::with_capacity(scene.boxes.len());
    let mut skipped = 0;

    for (bi, lb) in scene.boxes.iter().enumerate() {
        let b = if size_doubling.contains(&lb.class_id) { scale_footprint(&lb.bbox, 2.0) } else { lb.bbox };
        assigned.push(b);
        let t = encode(&b)?;
        encoded.push(t);
        let inside =
            extent.x_min <= b.x_ctr && b.x_ctr < extent.x_max && extent.y_min <= b.y_ctr && b.y_ctr < extent.y_max;
        if !inside {
            skipped += 1;
            continue;
        }
        let a = t.aabb;
        let area = a.area();
        let (Some((x0, x1)), Some((y0, y1))) =
            (grid.center_range(a.x_min, a.x_max, grid.origin.x), grid.center_range(a.y_min, a.y_max, grid.origin.y))
        else {
            continue;
        };
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                if !a.contains(grid.cell_center(ix, iy)) {
                    continue;
                }
                let slot = &mut owner[grid.linear(ix, iy)];
                match slot {
                    Some((_, best)) if *best <= area => {}
                    _ => *slot = Some((bi, area)),
                }
            }
        }
    }

    let cells = owner
        .par_iter()
        .enumerate()
        .map(|(i, o)| {
            o.map(|(bi, _)| {
                let (ix, iy) = grid.unlinear(i);
                let t = &encoded[bi];
                let ltrb = Ltrb::from_cell(grid.cell_center(ix, iy), &t.aabb);
                CellTarget {
                    class_id: scene.boxes[bi].class_id,
                    box_index: bi,
                    ltrb,
                    // A zero-area AABB cannot own a cell unless the center
                    // sits on it; centerness is then 1 by convention.
                    centerness: centerness(&ltrb).unwrap_or(1.0),
                    keypoints: t.keypoints(),
                }
            })
        })
        .collect();

    Ok(TargetMap { spec: *grid, cells, skipped_boxes: skipped, assigned_boxes: assigned })
}
