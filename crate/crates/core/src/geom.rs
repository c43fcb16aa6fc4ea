//! Box geometry in the bird's-eye-view plane.
//!
//! Conventions: right-handed BEV plane, yaw measured counter-clockwise from
//! +x. The heading of a box points from its center to the midpoint of the
//! front edge `V1V2`. Corners follow the nuScenes order front-left,
//! front-right, rear-right, rear-left, so `|V1V2| = w` and `|V1V4| = l`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn midpoint(self, o: Vec2) -> Vec2 {
        Vec2::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Angle-based 3D box: center, size and yaw about the z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox3D {
    pub x_ctr: f64,
    pub y_ctr: f64,
    pub z_ctr: f64,
    /// Extent of the front edge `V1V2`.
    pub w: f64,
    /// Extent along the heading, `V1V4`.
    pub l: f64,
    pub h: f64,
    pub theta: f64,
}

impl OrientedBox3D {
    /// Builds a validated box; `theta` is wrapped into (−π, π].
    pub fn new(center: [f64; 3], size: [f64; 3], theta: f64) -> Result<Self> {
        let b = Self {
            x_ctr: center[0],
            y_ctr: center[1],
            z_ctr: center[2],
            w: size[0],
            l: size[1],
            h: size[2],
            theta: wrap_angle(theta),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.x_ctr, self.y_ctr, self.z_ctr, self.w, self.l, self.h, self.theta];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite field in {self:?}")));
        }
        if self.w <= 0.0 || self.l <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "sizes must be positive, got w={} l={} h={}",
                self.w, self.l, self.h
            )));
        }
        Ok(())
    }

    pub fn center_bev(&self) -> Vec2 {
        Vec2::new(self.x_ctr, self.y_ctr)
    }

    pub fn heading(&self) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(c, s)
    }

    pub fn volume(&self) -> f64 {
        self.w * self.l * self.h
    }

    pub fn z_bottom(&self) -> f64 {
        self.z_ctr - 0.5 * self.h
    }

    pub fn z_top(&self) -> f64 {
        self.z_ctr + 0.5 * self.h
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = wrap_angle(theta);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb2D {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Aabb2D {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.x_min <= p.x && p.x <= self.x_max && self.y_min <= p.y && p.y <= self.y_max
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Smallest AABB enclosing both.
    pub fn hull(&self, o: &Aabb2D) -> Aabb2D {
        Aabb2D::new(self.x_min.min(o.x_min), self.y_min.min(o.y_min), self.x_max.max(o.x_max), self.y_max.max(o.y_max))
    }
}

/// The eight corners of a box: four BEV points shared by the bottom and top faces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerSet3D {
    pub bottom: [Vec2; 4],
    pub z_bottom: f64,
    pub z_top: f64,
}

impl CornerSet3D {
    /// `V1..V8` as xyz triples, bottom face first.
    pub fn vertices(&self) -> [[f64; 3]; 8] {
        let mut out = [[0.0; 3]; 8];
        for (i, p) in self.bottom.iter().enumerate() {
            out[i] = [p.x, p.y, self.z_bottom];
            out[i + 4] = [p.x, p.y, self.z_top];
        }
        out
    }

    /// Midpoint of the `V1V2` edge.
    pub fn front_midpoint(&self) -> Vec2 {
        self.bottom[0].midpoint(self.bottom[1])
    }
}

/// Counter-clockwise convex polygon. Empty means "no area".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon2D {
    pub vertices: Vec<Vec2>,
}

impl ConvexPolygon2D {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    /// Footprint of a box, reordered counter-clockwise.
    pub fn from_box(b: &OrientedBox3D) -> Self {
        let [v1, v2, v3, v4] = corners_bev(b);
        // nuScenes order runs clockwise in a right-handed frame.
        Self::new(vec![v1, v4, v3, v2])
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    // rem_euclid maps −π to π already; guard the other end against rounding.
    if t <= -PI {
        t += TAU;
    }
    t
}

/// The four BEV corners in nuScenes order (front-left, front-right,
/// rear-right, rear-left).
pub fn corners_bev(b: &OrientedBox3D) -> [Vec2; 4] {
    let c = b.center_bev();
    let fwd = b.heading();
    let left = Vec2::new(-fwd.y, fwd.x);
    let f = fwd * (0.5 * b.l);
    let s = left * (0.5 * b.w);
    [c + f + s, c + f - s, c - f - s, c - f + s]
}

pub fn corners_3d(b: &OrientedBox3D) -> CornerSet3D {
    CornerSet3D { bottom: corners_bev(b), z_bottom: b.z_bottom(), z_top: b.z_top() }
}

/// Componentwise min/max over a point set.
pub fn aabb_of(points: &[Vec2; 4]) -> Aabb2D {
    let mut a = Aabb2D::new(points[0].x, points[0].y, points[0].x, points[0].y);
    for p in &points[1..] {
        a.x_min = a.x_min.min(p.x);
        a.y_min = a.y_min.min(p.y);
        a.x_max = a.x_max.max(p.x);
        a.y_max = a.y_max.max(p.y);
    }
    a
}

/// Encapsulating AABB of a box footprint.
pub fn box_aabb(b: &OrientedBox3D) -> Aabb2D {
    aabb_of(&corners_bev(b))
}

/// Largest distance from any point of `a` to its nearest point in `b`, and
/// vice versa. Zero iff the two sets coincide.
pub fn point_set_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    let directed = |p: &[Vec2], q: &[Vec2]| {
        p.iter().map(|x| q.iter().map(|y| x.distance(*y)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(x: f64, y: f64, w: f64, l: f64, theta: f64) -> OrientedBox3D {
        OrientedBox3D::new([x, y, 0.0], [w, l, 1.0], theta).unwrap()
    }

    #[test]
    fn corners_axis_aligned() {
        let c = corners_bev(&bx(0.0, 0.0, 2.0, 4.0, 0.0));
        let expected = [Vec2::new(2.0, 1.0), Vec2::new(2.0, -1.0), Vec2::new(-2.0, -1.0), Vec2::new(-2.0, 1.0)];
        assert!(point_set_distance(&c, &expected) < 1e-15);
        assert_eq!(c[0].midpoint(c[1]), Vec2::new(2.0, 0.0));
        assert!((c[0].distance(c[1]) - 2.0).abs() < 1e-15);
        assert!((c[0].distance(c[3]) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn corners_half_turn() {
        let c = corners_bev(&bx(0.0, 0.0, 2.0, 4.0, PI));
        let m = c[0].midpoint(c[1]);
        assert!(m.distance(Vec2::new(-2.0, 0.0)) < 1e-12);
    }

    #[test]
    fn corners_thirty_degrees() {
        // Rotation-matrix oracle applied to the axis-aligned corners.
        let theta = PI / 6.0;
        let (s, c) = theta.sin_cos();
        let rot = |p: Vec2| Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y);
        let base = corners_bev(&bx(0.0, 0.0, 2.0, 4.0, 0.0));
        let oracle: Vec<Vec2> = base.iter().map(|p| rot(*p)).collect();
        let got = corners_bev(&bx(0.0, 0.0, 2.0, 4.0, theta));
        assert!(point_set_distance(&got, &oracle) < 1e-12);
        let frozen = [
            Vec2::new(1.232_050_807_568_877, 1.866_025_403_784_438_6),
            Vec2::new(2.232_050_807_568_877, 0.133_974_596_215_561_2),
            Vec2::new(-1.232_050_807_568_877, -1.866_025_403_784_438_6),
            Vec2::new(-2.232_050_807_568_877, -0.133_974_596_215_561_2),
        ];
        assert!(point_set_distance(&got, &frozen) < 1e-12);
    }

    #[test]
    fn corners_3d_heights() {
        let b = OrientedBox3D::new([3.0, -1.0, 1.0], [2.0, 4.0, 2.0], 0.3).unwrap();
        let cs = corners_3d(&b);
        assert_eq!(cs.z_bottom, 0.0);
        assert_eq!(cs.z_top, 2.0);
        assert_eq!(cs.bottom, corners_bev(&b));
        let v = cs.vertices();
        for i in 0..4 {
            assert_eq!(v[i][..2], v[i + 4][..2]);
        }
    }

    #[test]
    fn zero_height_rejected() {
        assert!(OrientedBox3D::new([0.0; 3], [1.0, 1.0, 0.0], 0.0).is_err());
        assert!(OrientedBox3D::new([f64::NAN, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0).is_err());
        assert!(OrientedBox3D::new([0.0; 3], [-1.0, 1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn aabb_examples() {
        let pts = [Vec2::new(2.0, 1.0), Vec2::new(2.0, -1.0), Vec2::new(-2.0, -1.0), Vec2::new(-2.0, 1.0)];
        assert_eq!(aabb_of(&pts), Aabb2D::new(-2.0, -1.0, 2.0, 1.0));

        let a = box_aabb(&bx(0.0, 0.0, 2.0, 4.0, PI / 6.0));
        let expected =
            [-2.232_050_807_568_877, -1.866_025_403_784_438_6, 2.232_050_807_568_877, 1.866_025_403_784_438_6];
        for (g, e) in a.as_array().iter().zip(expected) {
            assert!((g - e).abs() < 1e-12);
        }

        let p = Vec2::new(0.5, -3.0);
        let a = aabb_of(&[p; 4]);
        assert_eq!(a, Aabb2D::new(0.5, -3.0, 0.5, -3.0));
        assert_eq!(a.area(), 0.0);
    }

    #[test]
    fn wrap_angle_examples() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-3.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
    }

    fn arb_box() -> impl Strategy<Value = OrientedBox3D> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.3..20.0f64, 0.3..20.0f64, -PI..PI)
            .prop_map(|(x, y, w, l, t)| bx(x, y, w, l, t))
    }

    proptest! {
        #[test]
        fn aabb_contains_corners(b in arb_box()) {
            let c = corners_bev(&b);
            let a = aabb_of(&c);
            for p in c {
                prop_assert!(a.contains(p));
            }
            let (s, c) = b.theta.sin_cos();
            prop_assert!((a.width() - (b.l * c.abs() + b.w * s.abs())).abs() < 1e-9);
            prop_assert!((a.height() - (b.l * s.abs() + b.w * c.abs())).abs() < 1e-9);
        }

        #[test]
        fn full_turn_invariance(b in arb_box()) {
            let c0 = corners_bev(&b);
            let mut b2 = b;
            b2.theta += TAU;
            let c1 = corners_bev(&b2);
            for (p, q) in c0.iter().zip(c1.iter()) {
                prop_assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
            }
        }

        #[test]
        fn rectangle_invariant(b in arb_box()) {
            let [v1, v2, _, v4] = corners_bev(&b);
            prop_assert!((v2 - v1).dot(v4 - v1).abs() < 1e-9);
        }

        #[test]
        fn wrap_is_congruent(t in -100.0..100.0f64) {
            let w = wrap_angle(t);
            prop_assert!(w > -PI && w <= PI);
            let k = ((t - w) / TAU).round();
            prop_assert!((t - w - k * TAU).abs() < 1e-9);
        }
    }
}
