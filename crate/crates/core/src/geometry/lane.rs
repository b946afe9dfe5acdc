use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Projection of a point onto a polyline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneProjection {
    /// Signed offset, positive to the left of the direction of travel, m.
    pub d_lat: f64,
    /// Heading of the nearest segment, rad.
    pub tangent_heading: f64,
    /// Distance along the polyline to the foot point, m.
    pub arc_length: f64,
}

/// Distance from `p` to the closed segment `ab`; handles `a == b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let len2 = d.norm_sq();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.distance(a + d * t)
}

/// Projects `point` onto the nearest non-degenerate segment of `centerline`.
///
/// Ties between segments go to the earlier one. Zero-length segments are
/// skipped; a polyline with no usable segment is an error.
pub fn lateral_offset(point: Vec2, centerline: &[Vec2]) -> Result<LaneProjection> {
    if centerline.len() < 2 {
        return Err(Error::Geometry(format!(
            "centerline needs at least 2 vertices, got {}",
            centerline.len()
        )));
    }
    let mut best: Option<(f64, LaneProjection)> = None;
    let mut travelled = 0.0;
    for w in centerline.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = b - a;
        let len = d.norm();
        if len == 0.0 || !len.is_finite() {
            continue;
        }
        let u = d * (1.0 / len);
        let rel = point - a;
        let t = rel.dot(u).clamp(0.0, len);
        let foot = a + u * t;
        let dist = point.distance(foot);
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            let sign = if u.cross(rel) < 0.0 { -1.0 } else { 1.0 };
            best = Some((
                dist,
                LaneProjection { d_lat: sign * dist, tangent_heading: d.heading(), arc_length: travelled + t },
            ));
        }
        travelled += len;
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::Geometry("centerline has only zero-length segments".into()))
}
