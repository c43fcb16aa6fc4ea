//! Restricted quadrilateral targets.
//!
//! A box footprint is described by its encapsulating AABB, the offsets
//! `(u, v)` from the topmost (minimum y) and rightmost (maximum x) corners
//! to the nearer AABB edge, the selector bits telling which edge was nearer,
//! and the vector `(d_x, d_y)` from the box center to the midpoint of the
//! front edge. `z_ctr` and `h` pass through unchanged.
//!
//! Decoding works in the AABB-local frame with origin `(x_min, y_min)`.
//! Which recovered edge is `w` and which is `l` depends on the quadrant of
//! `(d_x, d_y)`:
//!
//! | quadrant            | `sqrt((W-u')^2 + v'^2)` | `sqrt(u'^2 + (H-v')^2)` |
//! |---------------------|-------------------------|-------------------------|
//! | `d_x, d_y` same sign| `l`                     | `w`                     |
//! | mixed signs         | `w`                     | `l`                     |
//!
//! with zero components counted as non-negative.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{aabb_of, corners_bev, wrap_angle, Aabb2D, CornerSet3D, OrientedBox3D, Vec2};

/// Regression targets for one box: AABB plus the eight keypoint channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rqr3dTargets {
    pub aabb: Aabb2D,
    pub u: f64,
    pub v: f64,
    pub amin_u: f64,
    pub amin_v: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub z_ctr: f64,
    pub h: f64,
}

/// Number of keypoint channels, in the order `u, v, amin_u, amin_v, d_x, d_y, z_ctr, h`.
pub const KEYPOINT_CHANNELS: usize = 8;

impl Rqr3dTargets {
    pub fn keypoints(&self) -> [f64; KEYPOINT_CHANNELS] {
        [self.u, self.v, self.amin_u, self.amin_v, self.d_x, self.d_y, self.z_ctr, self.h]
    }

    pub fn from_parts(aabb: Aabb2D, k: [f64; KEYPOINT_CHANNELS]) -> Self {
        Self { aabb, u: k[0], v: k[1], amin_u: k[2], amin_v: k[3], d_x: k[4], d_y: k[5], z_ctr: k[6], h: k[7] }
    }

    pub fn direction_case(&self) -> DirectionCase {
        DirectionCase::of(self.d_x, self.d_y)
    }
}

/// Sign quadrant of `(d_x, d_y)`; zero counts as non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectionCase {
    /// `d_x >= 0, d_y >= 0`, yaw in [0, π/2]
    PosPos,
    /// `d_x >= 0, d_y < 0`, yaw in [−π/2, 0)
    PosNeg,
    /// `d_x < 0, d_y >= 0`, yaw in (π/2, π]
    NegPos,
    /// `d_x < 0, d_y < 0`, yaw in (−π, −π/2)
    NegNeg,
}

impl DirectionCase {
    pub fn of(d_x: f64, d_y: f64) -> Self {
        match (d_x >= 0.0, d_y >= 0.0) {
            (true, true) => Self::PosPos,
            (true, false) => Self::PosNeg,
            (false, true) => Self::NegPos,
            (false, false) => Self::NegNeg,
        }
    }

    pub fn same_sign(self) -> bool {
        matches!(self, Self::PosPos | Self::NegNeg)
    }

    /// Indices (into front-left, front-right, rear-right, rear-left) of the
    /// minimum-y and maximum-x corners for a yaw inside this quadrant. At the
    /// quadrant boundaries both candidates tie and this picks the one the
    /// decoder's corner table assumes.
    pub fn extreme_vertices(self) -> (usize, usize) {
        match self {
            Self::PosPos => (2, 1),
            Self::PosNeg => (1, 0),
            Self::NegPos => (3, 2),
            Self::NegNeg => (0, 3),
        }
    }
}

fn min_with_index(first: f64, second: f64) -> (f64, f64) {
    if first <= second {
        (first, 0.0)
    } else {
        (second, 1.0)
    }
}

pub fn encode(b: &OrientedBox3D) -> Result<Rqr3dTargets> {
    b.validate()?;
    let corners = corners_bev(b);
    let aabb = aabb_of(&corners);
    let d = corners[0].midpoint(corners[1]) - b.center_bev();
    let (top, right) = DirectionCase::of(d.x, d.y).extreme_vertices();
    let x_top = corners[top].x;
    let y_right = corners[right].y;
    let (u, amin_u) = min_with_index(x_top - aabb.x_min, aabb.x_max - x_top);
    let (v, amin_v) = min_with_index(y_right - aabb.y_min, aabb.y_max - y_right);
    Ok(Rqr3dTargets { aabb, u, v, amin_u, amin_v, d_x: d.x, d_y: d.y, z_ctr: b.z_ctr, h: b.h })
}

/// Threshold for the real-valued selector channels.
pub fn binarize_amin(raw: f64) -> u8 {
    u8::from(raw >= 0.5)
}

/// Offsets of the top and right corners measured from `(x_min, y_min)`.
pub fn reassign_offsets(t: &Rqr3dTargets) -> (f64, f64) {
    let u = if binarize_amin(t.amin_u) == 0 { t.u } else { t.aabb.width() - t.u };
    let v = if binarize_amin(t.amin_v) == 0 { t.v } else { t.aabb.height() - t.v };
    (u, v)
}

fn recovered_edges(t: &Rqr3dTargets) -> (f64, f64) {
    let (u, v) = reassign_offsets(t);
    let (width, height) = (t.aabb.width(), t.aabb.height());
    let top_to_right = (width - u).hypot(v);
    let top_to_left = u.hypot(height - v);
    (top_to_right, top_to_left)
}

pub fn decode(t: &Rqr3dTargets) -> Result<OrientedBox3D> {
    let (top_to_right, top_to_left) = recovered_edges(t);
    let (w, l) = if t.direction_case().same_sign() { (top_to_left, top_to_right) } else { (top_to_right, top_to_left) };
    if !(w > 0.0 && l > 0.0) {
        return Err(Error::DegenerateTargets(format!("recovered edge lengths must be positive, got w={w} l={l}")));
    }
    if !(t.d_x.is_finite() && t.d_y.is_finite()) || (t.d_x == 0.0 && t.d_y == 0.0) {
        return Err(Error::DegenerateTargets("direction vector (d_x, d_y) is zero".into()));
    }
    let c = t.aabb.center();
    let b =
        OrientedBox3D { x_ctr: c.x, y_ctr: c.y, z_ctr: t.z_ctr, w, l, h: t.h, theta: wrap_angle(t.d_y.atan2(t.d_x)) };
    b.validate().map_err(|e| Error::DegenerateTargets(e.to_string()))?;
    Ok(b)
}

/// Corners straight from the targets, using the quadrant case table.
/// `V1V2` is the front edge; within it the left/right labels are the mirror of
/// [`corners_bev`], so compare corner sets rather than indices.
pub fn reconstruct_corners(t: &Rqr3dTargets) -> Result<CornerSet3D> {
    decode(t)?;
    let (u, v) = reassign_offsets(t);
    let Aabb2D { x_min, y_min, x_max, y_max } = t.aabb;
    let top = Vec2::new(x_min + u, y_min);
    let right = Vec2::new(x_max, y_min + v);
    let bottom = Vec2::new(x_max - u, y_max);
    let left = Vec2::new(x_min, y_max - v);
    let ring = match t.direction_case() {
        DirectionCase::PosPos => [right, bottom, left, top],
        DirectionCase::PosNeg => [top, right, bottom, left],
        DirectionCase::NegPos => [bottom, left, top, right],
        DirectionCase::NegNeg => [left, top, right, bottom],
    };
    Ok(CornerSet3D { bottom: ring, z_bottom: t.z_ctr - 0.5 * t.h, z_top: t.z_ctr + 0.5 * t.h })
}

/// Enforces `w <= l` by swapping the edges and turning the yaw a quarter.
pub fn canonicalize_wl(b: &OrientedBox3D) -> OrientedBox3D {
    if b.w > b.l {
        OrientedBox3D { w: b.l, l: b.w, theta: wrap_angle(b.theta + std::f64::consts::FRAC_PI_2), ..*b }
    } else {
        *b
    }
}

pub fn encode_batch(boxes: &[OrientedBox3D]) -> Vec<Result<Rqr3dTargets>> {
    boxes.par_iter().map(encode).collect()
}

pub fn decode_batch(targets: &[Rqr3dTargets]) -> Vec<Result<OrientedBox3D>> {
    targets.par_iter().map(decode).collect()
}

/// True when `theta` is within `tol` of 0, ±π/2 or π, where corner
/// selections tie.
pub fn near_cardinal(theta: f64, tol: f64) -> bool {
    let q = std::f64::consts::FRAC_PI_2;
    let r = theta.rem_euclid(q);
    r <= tol || q - r <= tol
}
