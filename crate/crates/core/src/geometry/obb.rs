use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, segments_intersect, Vec2};

/// A rectangle footprint: center, heading of the long axis, full extents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedBox {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

/// Overlap depths measured along the first box's own axes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Penetration {
    pub long: f64,
    pub lat: f64,
}

impl Penetration {
    pub fn depth(&self) -> f64 {
        self.long.min(self.lat)
    }

    pub fn overlapping(&self) -> bool {
        self.long > 0.0 && self.lat > 0.0
    }
}

impl OrientedBox {
    /// Builds a box without checking extents; callers pass validated sizes.
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        debug_assert!(length > 0.0 && width > 0.0);
        OrientedBox { center, heading, length, width }
    }

    pub fn try_new(center: Vec2, heading: f64, length: f64, width: f64) -> Result<Self> {
        if !(center.is_finite() && heading.is_finite()) {
            return Err(Error::Geometry("non-finite box pose".into()));
        }
        if !(length.is_finite() && width.is_finite() && length > 0.0 && width > 0.0) {
            return Err(Error::Geometry(format!("box extents must be > 0 (got {length} x {width})")));
        }
        Ok(OrientedBox { center, heading, length, width })
    }

    /// Unit longitudinal and lateral (left) axes.
    pub fn axes(&self) -> (Vec2, Vec2) {
        let u = Vec2::from_heading(self.heading);
        (u, u.perp())
    }

    /// Corners in counter-clockwise order starting front-right.
    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let hl = u * (self.length / 2.0);
        let hw = v * (self.width / 2.0);
        let c = self.center;
        [c + hl - hw, c + hl + hw, c - hl + hw, c - hl - hw]
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Midpoint of the front edge.
    pub fn front(&self) -> Vec2 {
        self.center + Vec2::from_heading(self.heading) * (self.length / 2.0)
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let (u, v) = self.axes();
        let c = self.center.dot(axis);
        let r = self.length / 2.0 * u.dot(axis).abs() + self.width / 2.0 * v.dot(axis).abs();
        (c - r, c + r)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (u, v) = self.axes();
        let d = p - self.center;
        d.dot(u).abs() <= self.length / 2.0 && d.dot(v).abs() <= self.width / 2.0
    }
}

fn interval_overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.1.min(b.1) - a.0.max(b.0)
}

/// Separating-axis test over the four face normals of both boxes.
///
/// Returns the projected overlap along `a`'s longitudinal and lateral axes,
/// or zero depths when any axis separates the boxes (touching counts as
/// separated).
pub fn obb_penetration(a: &OrientedBox, b: &OrientedBox) -> Penetration {
    let (au, av) = a.axes();
    let (bu, bv) = b.axes();
    let long = interval_overlap(a.project(au), b.project(au));
    let lat = interval_overlap(a.project(av), b.project(av));
    if long <= 0.0 || lat <= 0.0 {
        return Penetration::default();
    }
    for axis in [bu, bv] {
        if interval_overlap(a.project(axis), b.project(axis)) <= 0.0 {
            return Penetration::default();
        }
    }
    Penetration { long, lat }
}

/// Minimum distance between the two box outlines; zero when they overlap.
pub fn edge_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    if obb_penetration(a, b).overlapping() {
        return 0.0;
    }
    let ca = a.corners();
    let cb = b.corners();
    let mut best = f64::INFINITY;
    for i in 0..4 {
        let (p1, p2) = (ca[i], ca[(i + 1) % 4]);
        for j in 0..4 {
            let (q1, q2) = (cb[j], cb[(j + 1) % 4]);
            best = best.min(segment_distance(p1, p2, q1, q2));
        }
    }
    best
}

fn segment_distance(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}
