//! Radar points onto the BEV grid with overwrite semantics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::BevGridSpec;
use crate::geom::Vec2;
use crate::scene::RadarPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BevCell {
    /// Index of the point that last wrote this cell.
    pub point_index: usize,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BevGrid {
    pub spec: BevGridSpec,
    /// Row-major by `spec.linear(ix, iy)`; `None` is an unoccupied cell.
    pub cells: Vec<Option<BevCell>>,
    pub dropped: usize,
}

impl BevGrid {
    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn get(&self, ix: usize, iy: usize) -> Option<&BevCell> {
        self.cells[self.spec.linear(ix, iy)].as_ref()
    }
}

/// Writes points in input order; the last point landing in a cell wins.
/// Non-finite and out-of-range points are dropped and counted.
pub fn map_points_to_bev(points: &[RadarPoint], spec: &BevGridSpec) -> BevGrid {
    let mut cells: Vec<Option<BevCell>> = vec![None; spec.num_cells()];
    let mut dropped = 0;
    for (i, p) in points.iter().enumerate() {
        let cell = Vec2::new(p.x, p.y).is_finite().then(|| spec.cell_of(Vec2::new(p.x, p.y))).flatten();
        match cell {
            Some((ix, iy)) => {
                cells[spec.linear(ix, iy)] = Some(BevCell { point_index: i, feature: p.feature.clone() });
            }
            None => dropped += 1,
        }
    }
    BevGrid { spec: *spec, cells, dropped }
}

/// One grid per point cloud, rasterized in parallel across clouds.
pub fn map_batch(clouds: &[Vec<RadarPoint>], spec: &BevGridSpec) -> Vec<BevGrid> {
    clouds.par_iter().map(|c| map_points_to_bev(c, spec)).collect()
}
