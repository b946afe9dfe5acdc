use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, OrientedBox, Vec2};

/// A simple (non-self-intersecting) closed polygon with at least three
/// vertices. Either winding is accepted.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        let p = Polygon { vertices };
        p.validate("")?;
        Ok(p)
    }

    pub(crate) fn validate(&self, path: &str) -> Result<()> {
        let v = &self.vertices;
        if v.len() < 3 {
            return Err(Error::validation(path, format!("polygon needs at least 3 vertices, got {}", v.len())));
        }
        if let Some(i) = v.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation(format!("{path}[{i}]"), "non-finite vertex"));
        }
        let n = v.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                    return Err(Error::validation(
                        path,
                        format!("polygon is not simple: edges {i} and {j} intersect"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        point_in_polygon(p, &self.vertices)
    }

    /// Distance from `p` to the polygon, zero inside.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            0.0
        } else {
            boundary_distance(p, &self.vertices)
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Translates every vertex by `offset`.
    pub fn translated(&self, offset: Vec2) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|&p| p + offset).collect() }
    }
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>() / 2.0
}

/// Unsigned shoelace area.
pub fn polygon_area(v: &[Vec2]) -> f64 {
    signed_area(v).abs()
}

/// Crossing-number point-in-polygon test.
pub fn point_in_polygon(p: Vec2, v: &[Vec2]) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn boundary_distance(p: Vec2, v: &[Vec2]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| point_segment_distance(p, v[i], v[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// True when closed segments `p1p2` and `q1q2` share at least one point.
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

/// Counter-clockwise copy with consecutive duplicate vertices removed.
fn normalized_ccw(v: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = Vec::with_capacity(v.len());
    for &p in v {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if signed_area(&pts) < 0.0 {
        pts.reverse();
    }
    pts
}

fn is_convex_ccw(v: &[Vec2]) -> bool {
    let n = v.len();
    (0..n).all(|i| orient(v[i], v[(i + 1) % n], v[(i + 2) % n]) >= 0.0)
}

fn point_in_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0
}

/// Ear-clipping triangulation of a simple polygon. Triangles are CCW.
pub fn triangulate(v: &[Vec2]) -> Vec<[Vec2; 3]> {
    let pts = normalized_ccw(v);
    if pts.len() < 3 {
        return vec![];
    }
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut out = Vec::with_capacity(pts.len() - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ip, ic, inx) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (pts[ip], pts[ic], pts[inx]);
            let turn = orient(a, b, c);
            if turn < 0.0 {
                continue;
            }
            if turn == 0.0 {
                // Collinear vertex: drop it, it carries no area.
                idx.remove(i);
                clipped = true;
                break;
            }
            let blocked = idx
                .iter()
                .any(|&j| j != ip && j != ic && j != inx && point_in_triangle(pts[j], a, b, c));
            if blocked {
                continue;
            }
            out.push([a, b, c]);
            idx.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            // Only reachable through floating-point trouble; fan the remainder.
            for k in 1..idx.len() - 1 {
                out.push([pts[idx[0]], pts[idx[k]], pts[idx[k + 1]]]);
            }
            return out;
        }
    }
    out.push([pts[idx[0]], pts[idx[1]], pts[idx[2]]]);
    out
}

/// Sutherland–Hodgman clipping of `subject` by a convex CCW `clipper`.
fn clip_convex(subject: &[Vec2], clipper: &[Vec2]) -> Vec<Vec2> {
    let mut output = subject.to_vec();
    let n = clipper.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let (c1, c2) = (clipper[i], clipper[(i + 1) % n]);
        let inside = |p: Vec2| orient(c1, c2, p) >= 0.0;
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let (ci, pi) = (inside(cur), inside(prev));
            if ci {
                if !pi {
                    output.push(line_intersection(prev, cur, c1, c2));
                }
                output.push(cur);
            } else if pi {
                output.push(line_intersection(prev, cur, c1, c2));
            }
        }
    }
    output
}

fn line_intersection(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> Vec2 {
    let r = p2 - p1;
    let s = q2 - q1;
    let denom = r.cross(s);
    if denom == 0.0 {
        return p1;
    }
    let t = (q1 - p1).cross(s) / denom;
    p1 + r * t
}

/// Area of the intersection of `b` with the polygon `poly`, m².
pub fn polygon_overlap_area(b: &OrientedBox, poly: &[Vec2]) -> Result<f64> {
    if poly.len() < 3 {
        return Err(Error::Geometry(format!(
            "polygon needs at least 3 vertices, got {}",
            poly.len()
        )));
    }
    let clipper = b.corners();
    let pts = normalized_ccw(poly);
    if pts.len() < 3 {
        return Ok(0.0);
    }
    let area = if is_convex_ccw(&pts) {
        polygon_area(&clip_convex(&pts, &clipper))
    } else {
        triangulate(&pts)
            .iter()
            .map(|tri| polygon_area(&clip_convex(tri, &clipper)))
            .sum()
    };
    Ok(area.max(0.0))
}

/// A union of polygons with its outer boundary precomputed, for repeated
/// signed-distance queries.
#[derive(Clone, Debug)]
pub struct Region {
    polygons: Vec<Polygon>,
    boundary: Vec<(Vec2, Vec2)>,
}

const BOUNDARY_PROBE: f64 = 1e-6;

impl Region {
    pub fn new(polygons: &[Polygon]) -> Result<Self> {
        if polygons.is_empty() {
            return Err(Error::Geometry("region needs at least one polygon".into()));
        }
        let polygons = polygons.to_vec();
        let mut boundary = Vec::new();
        for (i, poly) in polygons.iter().enumerate() {
            for (a, b) in poly.edges() {
                let d = b - a;
                let len = d.norm();
                if len == 0.0 {
                    continue;
                }
                let mut cuts = vec![0.0, 1.0];
                for (j, other) in polygons.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    for (c, e) in other.edges() {
                        cuts.extend(crossing_params(a, b, c, e));
                    }
                }
                cuts.retain(|t| (0.0..=1.0).contains(t));
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                let normal = d.perp() * (1.0 / len);
                for w in cuts.windows(2) {
                    if w[1] - w[0] <= 0.0 {
                        continue;
                    }
                    let mid = a + d * ((w[0] + w[1]) / 2.0);
                    let left = mid + normal * BOUNDARY_PROBE;
                    let right = mid - normal * BOUNDARY_PROBE;
                    let interior = polygons.iter().any(|p| p.contains(left))
                        && polygons.iter().any(|p| p.contains(right));
                    if !interior {
                        boundary.push((a + d * w[0], a + d * w[1]));
                    }
                }
            }
        }
        if boundary.is_empty() {
            boundary = polygons.iter().flat_map(|p| p.edges().collect::<Vec<_>>()).collect();
        }
        Ok(Region { polygons, boundary })
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.polygons.iter().any(|poly| poly.contains(p))
    }

    /// Positive inside the union, negative outside; magnitude is the
    /// distance to the union's boundary.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        let d = self
            .boundary
            .iter()
            .map(|&(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min);
        if self.contains(p) {
            d
        } else {
            -d
        }
    }

    pub fn boundary(&self) -> &[(Vec2, Vec2)] {
        &self.boundary
    }
}

/// Parameters along `ab` where it meets segment `ce` (both endpoints of a
/// collinear overlap).
fn crossing_params(a: Vec2, b: Vec2, c: Vec2, e: Vec2) -> Vec<f64> {
    let r = b - a;
    let s = e - c;
    let denom = r.cross(s);
    let qp = c - a;
    if denom == 0.0 {
        if qp.cross(r) != 0.0 {
            return vec![];
        }
        let rr = r.norm_sq();
        return vec![qp.dot(r) / rr, (e - a).dot(r) / rr];
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        vec![t]
    } else {
        vec![]
    }
}

/// Signed distance from `point` to the union of `polygons`.
pub fn signed_distance_to_region(point: Vec2, polygons: &[Polygon]) -> Result<f64> {
    Ok(Region::new(polygons)?.signed_distance(point))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, s: f64) -> Polygon {
        Polygon::new(vec![
            Vec2::new(x0, y0),
            Vec2::new(x0 + s, y0),
            Vec2::new(x0 + s, y0 + s),
            Vec2::new(x0, y0 + s),
        ])
        .unwrap()
    }

    #[test]
    fn rejects_bowtie_and_short_polygons() {
        assert!(Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]).is_err());
        assert!(Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 2.0)
        ])
        .is_err());
    }

    #[test]
    fn box_inside_polygon_has_box_area() {
        let b = OrientedBox::new(Vec2::new(5.0, 5.0), 0.3, 4.0, 2.0);
        let a = polygon_overlap_area(&b, square(0.0, 0.0, 10.0).vertices()).unwrap();
        assert!((a - 8.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_is_zero() {
        let b = OrientedBox::new(Vec2::new(50.0, 5.0), 0.3, 4.0, 2.0);
        assert_eq!(polygon_overlap_area(&b, square(0.0, 0.0, 10.0).vertices()).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_polygon_errors() {
        let b = OrientedBox::new(Vec2::ZERO, 0.0, 1.0, 1.0);
        assert!(polygon_overlap_area(&b, &[Vec2::ZERO, Vec2::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn concave_polygon_is_triangulated() {
        // L-shape of area 3 with the unit box covering its notch corner.
        let l = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 2.0),
            Vec2::new(0.0, 2.0),
        ];
        let tris = triangulate(&l);
        let total: f64 = tris.iter().map(|t| polygon_area(t)).sum();
        assert!((total - 3.0).abs() < 1e-12);
        let b = OrientedBox::new(Vec2::new(1.0, 1.0), 0.0, 1.0, 1.0);
        let a = polygon_overlap_area(&b, &l).unwrap();
        assert!((a - 0.75).abs() < 1e-12, "{a}");
    }

    #[test]
    fn signed_distance_basics() {
        let sq = [square(0.0, 0.0, 10.0)];
        assert!((signed_distance_to_region(Vec2::new(5.0, 5.0), &sq).unwrap() - 5.0).abs() < 1e-12);
        assert!((signed_distance_to_region(Vec2::new(11.0, 5.0), &sq).unwrap() + 1.0).abs() < 1e-12);
        assert!(signed_distance_to_region(Vec2::ZERO, &[]).is_err());
    }

    #[test]
    fn union_boundary_drops_interior_edges() {
        let region = Region::new(&[square(0.0, 0.0, 10.0), square(6.0, 0.0, 10.0)]).unwrap();
        // x = 8 lies inside both squares; nearest union boundary is y = 0 or y = 10.
        assert!((region.signed_distance(Vec2::new(8.0, 5.0)) - 5.0).abs() < 1e-12);
        // Adjacent tiles sharing an edge behave like one rectangle.
        let tiles = Region::new(&[square(0.0, 0.0, 10.0), square(10.0, 0.0, 10.0)]).unwrap();
        assert!((tiles.signed_distance(Vec2::new(10.0, 5.0)) - 5.0).abs() < 1e-12);
    }
}
