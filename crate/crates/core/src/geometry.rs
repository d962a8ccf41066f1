//! Planar polygon utilities: convex hulls, widths and minimum-area enclosing
//! rectangles by rotating calipers.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Signed shoelace area; positive for counterclockwise vertex order.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    0.5 * acc
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

/// Convex hull by Andrew's monotone chain. Counterclockwise, collinear points
/// dropped, first vertex is the lowest-leftmost point.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    // turns below this are treated as collinear (rounding noise)
    let eps = 1e-14 * diameter_bound(&pts).powi(2);
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= eps {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= eps {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Even-odd point in polygon test.
pub fn point_in_polygon(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let xi = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < xi {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Width of the point set measured along the unit direction at `angle`.
pub fn width_along(points: &[Point], angle: f64) -> f64 {
    let dir = Point::new(angle.cos(), angle.sin());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in points {
        let t = p.dot(dir);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    hi - lo
}

// Bounding-box diagonal, an upper bound for the diameter.
fn diameter_bound(points: &[Point]) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    (x1 - x0).hypot(y1 - y0)
}

/// Maps an angle onto the half-open range (-pi/2, pi/2].
pub fn normalize_half_turn(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(PI);
    if a > FRAC_PI_2 {
        a -= PI;
    }
    a
}

/// Width of a convex hull perpendicular to each of its edges.
#[derive(Clone, Copy, Debug)]
pub struct EdgeWidth {
    /// Direction of the edge, in (-pi/2, pi/2].
    pub edge_angle: f64,
    pub width: f64,
}

/// Rotating-calipers sweep: for each hull edge, the distance to the
/// antipodal vertex. The minimum over edges is the minimal width.
pub fn edge_widths(hull: &[Point]) -> Vec<EdgeWidth> {
    let n = hull.len();
    if n < 3 {
        return Vec::new();
    }
    let min_len = 1e-9 * diameter_bound(hull);
    let mut out = Vec::with_capacity(n);
    let mut k = usize::MAX;
    for i in 0..n {
        let p = hull[i];
        let q = hull[(i + 1) % n];
        let len = q.sub(p).dot(q.sub(p)).sqrt();
        if len <= min_len {
            continue;
        }
        if k == usize::MAX {
            k = (0..n)
                .max_by(|&a, &b| cross(p, q, hull[a]).total_cmp(&cross(p, q, hull[b])))
                .unwrap();
        }
        while cross(p, q, hull[(k + 1) % n]) > cross(p, q, hull[k]) {
            k = (k + 1) % n;
        }
        let width = cross(p, q, hull[k]) / len;
        let edge_angle = normalize_half_turn((q.y - p.y).atan2(q.x - p.x));
        out.push(EdgeWidth { edge_angle, width });
    }
    out
}

/// Minimum-area enclosing rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnclosingRect {
    pub center: Point,
    /// Direction of the long side, in (-pi/2, pi/2]. Squares report the side
    /// whose direction lies in (-pi/4, pi/4].
    pub angle: f64,
    pub side_long: f64,
    pub side_short: f64,
}

impl EnclosingRect {
    pub fn area(&self) -> f64 {
        self.side_long * self.side_short
    }

    /// Angular distance of the rectangle axes from the coordinate axes.
    pub fn axis_deviation(&self) -> f64 {
        let a = self.angle.abs();
        a.min(FRAC_PI_2 - a)
    }
}

/// Minimum-area enclosing rectangle of a convex hull by rotating calipers:
/// one side of the optimal rectangle is collinear with a hull edge.
pub fn min_area_rect(hull: &[Point]) -> Option<EnclosingRect> {
    let n = hull.len();
    if n < 3 {
        return None;
    }
    let mut best: Option<(f64, EnclosingRect)> = None;
    let (mut right, mut top, mut left) = (0usize, 0usize, 0usize);
    let mut initialised = false;
    let min_len = 1e-9 * diameter_bound(hull);
    for i in 0..n {
        let p = hull[i];
        let q = hull[(i + 1) % n];
        let d = q.sub(p);
        let len = d.dot(d).sqrt();
        if len <= min_len {
            continue;
        }
        let e = Point::new(d.x / len, d.y / len);
        let nrm = Point::new(-e.y, e.x);
        let along = |k: usize| hull[k].sub(p).dot(e);
        let up = |k: usize| hull[k].sub(p).dot(nrm);
        if !initialised {
            for k in 0..n {
                if along(k) > along(right) {
                    right = k;
                }
                if up(k) > up(top) {
                    top = k;
                }
                if along(k) < along(left) {
                    left = k;
                }
            }
            initialised = true;
        } else {
            for _ in 0..n {
                if along((right + 1) % n) > along(right) {
                    right = (right + 1) % n;
                } else {
                    break;
                }
            }
            for _ in 0..n {
                if up((top + 1) % n) > up(top) {
                    top = (top + 1) % n;
                } else {
                    break;
                }
            }
            for _ in 0..n {
                if along((left + 1) % n) < along(left) {
                    left = (left + 1) % n;
                } else {
                    break;
                }
            }
        }
        let (lo, hi) = (along(left).min(0.0), along(right).max(len));
        let height = up(top);
        let width = hi - lo;
        let area = width * height;
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            let mid_e = 0.5 * (lo + hi);
            let center = Point::new(
                p.x + e.x * mid_e + nrm.x * 0.5 * height,
                p.y + e.y * mid_e + nrm.y * 0.5 * height,
            );
            let edge_angle = e.y.atan2(e.x);
            let (long, short, long_angle) = if width >= height {
                (width, height, edge_angle)
            } else {
                (height, width, edge_angle + FRAC_PI_2)
            };
            let mut angle = normalize_half_turn(long_angle);
            // squares: report the side direction closest to the x axis
            if (width - height).abs() <= 1e-12 * long && angle.abs() > FRAC_PI_4 {
                angle = normalize_half_turn(angle + FRAC_PI_2);
            }
            best = Some((
                area,
                EnclosingRect {
                    center,
                    angle,
                    side_long: long,
                    side_short: short,
                },
            ));
        }
    }
    best.map(|(_, r)| r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(w: f64, h: f64) -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(w, 0.0),
            Point::new(w, h),
            Point::new(0.0, h),
        ]
    }

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let mut pts = rect(2.0, 1.0);
        pts.push(Point::new(1.0, 0.5));
        pts.push(Point::new(1.0, 0.0));
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!((signed_area(&hull) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn widths_of_rectangle() {
        let hull = convex_hull(&rect(4.0, 1.0));
        let min = edge_widths(&hull)
            .into_iter()
            .map(|w| w.width)
            .fold(f64::INFINITY, f64::min);
        assert!((min - 1.0).abs() < 1e-15);
        assert!((width_along(&hull, FRAC_PI_2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn enclosing_rectangle_of_axis_aligned_rectangle() {
        let r = min_area_rect(&convex_hull(&rect(4.0, 1.0))).unwrap();
        assert!((r.side_long - 4.0).abs() < 1e-12);
        assert!((r.side_short - 1.0).abs() < 1e-12);
        assert!(r.angle.abs() < 1e-12);
        assert!((r.center.x - 2.0).abs() < 1e-12 && (r.center.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn enclosing_rectangle_is_rotation_equivariant() {
        let theta = 30f64.to_radians();
        let pts: Vec<Point> = rect(4.0, 1.0).into_iter().map(|p| p.rotate(theta)).collect();
        let r = min_area_rect(&convex_hull(&pts)).unwrap();
        assert!((r.angle - theta).abs() < 1e-9, "angle {}", r.angle);
        assert!((r.area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn point_in_polygon_basic() {
        let poly = rect(2.0, 1.0);
        assert!(point_in_polygon(&poly, Point::new(1.0, 0.5)));
        assert!(!point_in_polygon(&poly, Point::new(2.5, 0.5)));
    }
}
