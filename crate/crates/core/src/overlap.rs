//! Overlap measures: axis-aligned IoU/GIoU, convex clipping, rotated BEV IoU
//! and 3D IoU.

use serde::{Deserialize, Serialize};

use crate::geom::{Aabb2D, ConvexPolygon2D, OrientedBox3D, Vec2};

/// Clipped polygons smaller than this are treated as empty.
pub const AREA_EPS: f64 = 1e-12;
/// Consecutive clip vertices closer than this are merged.
pub const VERTEX_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub intersection: f64,
    pub union: f64,
    pub iou: f64,
    pub giou: f64,
}

impl OverlapResult {
    fn from_areas(intersection: f64, union: f64, hull: f64) -> Self {
        let iou = if union > 0.0 { intersection / union } else { 0.0 };
        let giou = if hull > 0.0 { iou - (hull - union) / hull } else { iou };
        Self { intersection, union, iou, giou }
    }
}

pub fn iou_aabb(a: &Aabb2D, b: &Aabb2D) -> OverlapResult {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    OverlapResult::from_areas(inter, union, a.hull(b).area())
}

/// Signed area (positive for counter-clockwise order).
fn signed_area(pts: &[Vec2]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..pts.len() {
        let p = pts[i];
        let q = pts[(i + 1) % pts.len()];
        acc += p.cross(q);
    }
    0.5 * acc
}

/// Shoelace area.
pub fn polygon_area(p: &ConvexPolygon2D) -> f64 {
    signed_area(&p.vertices).abs()
}

fn clip_halfplane(poly: &[Vec2], a: Vec2, b: Vec2) -> Vec<Vec2> {
    let edge = b - a;
    let side = |p: Vec2| edge.cross(p - a);
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let s = poly[i];
        let e = poly[(i + 1) % poly.len()];
        let (ds, de) = (side(s), side(e));
        let (s_in, e_in) = (ds >= 0.0, de >= 0.0);
        if s_in != e_in {
            let t = ds / (ds - de);
            out.push(s + (e - s) * t);
        }
        if e_in {
            out.push(e);
        }
    }
    out
}

fn dedup(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    pts.dedup_by(|a, b| a.distance(*b) < VERTEX_EPS);
    while pts.len() > 1 && pts[0].distance(pts[pts.len() - 1]) < VERTEX_EPS {
        pts.pop();
    }
    pts
}

/// Intersection of two counter-clockwise convex polygons (Sutherland–Hodgman).
pub fn clip_convex(subject: &ConvexPolygon2D, clip: &ConvexPolygon2D) -> ConvexPolygon2D {
    if subject.is_empty() || clip.is_empty() {
        return ConvexPolygon2D::empty();
    }
    let mut out = subject.vertices.clone();
    let n = clip.vertices.len();
    for i in 0..n {
        out = clip_halfplane(&out, clip.vertices[i], clip.vertices[(i + 1) % n]);
        if out.is_empty() {
            return ConvexPolygon2D::empty();
        }
    }
    let out = dedup(out);
    if out.len() < 3 || signed_area(&out).abs() < AREA_EPS {
        return ConvexPolygon2D::empty();
    }
    ConvexPolygon2D::new(out)
}

/// Counter-clockwise convex hull (Andrew's monotone chain).
pub fn convex_hull(points: &[Vec2]) -> ConvexPolygon2D {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return ConvexPolygon2D::new(pts);
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    ConvexPolygon2D::new(hull)
}

fn box_key(b: &OrientedBox3D) -> [u64; 7] {
    [b.x_ctr, b.y_ctr, b.z_ctr, b.w, b.l, b.h, b.theta].map(f64::to_bits)
}

/// Orders a pair so that `f(a, b)` and `f(b, a)` run the same arithmetic.
fn ordered<'a>(a: &'a OrientedBox3D, b: &'a OrientedBox3D) -> (&'a OrientedBox3D, &'a OrientedBox3D) {
    if box_key(a) <= box_key(b) {
        (a, b)
    } else {
        (b, a)
    }
}

fn bev_intersection(a: &OrientedBox3D, b: &OrientedBox3D) -> (f64, ConvexPolygon2D, ConvexPolygon2D) {
    let pa = ConvexPolygon2D::from_box(a);
    let pb = ConvexPolygon2D::from_box(b);
    let inter = polygon_area(&clip_convex(&pa, &pb));
    (inter, pa, pb)
}

/// IoU and GIoU of the two BEV footprints; the GIoU hull is the convex hull
/// of both.
pub fn iou_rotated_bev(a: &OrientedBox3D, b: &OrientedBox3D) -> OverlapResult {
    let (a, b) = ordered(a, b);
    let (inter, pa, pb) = bev_intersection(a, b);
    let union = a.w * a.l + b.w * b.l - inter;
    let all: Vec<Vec2> = pa.vertices.iter().chain(pb.vertices.iter()).copied().collect();
    let hull = polygon_area(&convex_hull(&all));
    OverlapResult::from_areas(inter, union, hull)
}

pub fn iou_3d(a: &OrientedBox3D, b: &OrientedBox3D) -> f64 {
    let (a, b) = ordered(a, b);
    let dz = (a.z_top().min(b.z_top()) - a.z_bottom().max(b.z_bottom())).max(0.0);
    if dz == 0.0 {
        return 0.0;
    }
    let (inter_bev, _, _) = bev_intersection(a, b);
    let inter = inter_bev * dz;
    let union = a.volume() + b.volume() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}
