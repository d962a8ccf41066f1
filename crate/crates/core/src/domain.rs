//! Convex domains written as `{a <= x <= b, f1(x) <= y <= f2(x)}`, their
//! normalization (minimal width along y, `min f1 = 0`, `max f2 = 1`), the
//! height profile `h = f2 - f1` and the length scale `L`.

use crate::error::{Error, Result};
use crate::geometry::{
    convex_hull, edge_widths, normalize_half_turn, polygon_area, width_along, Point,
};
use crate::interp::Pchip;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// One boundary graph `y = f(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curve {
    Const { value: f64 },
    Line { intercept: f64, slope: f64 },
    /// `cy +- half_height * sqrt(1 - ((x - cx) / half_len)^2)`
    EllipseArc { cx: f64, half_len: f64, cy: f64, half_height: f64, upper: bool },
    /// Flat segment at `cy +- radius` capped by semicircles of `radius`.
    StadiumArc { x0: f64, x1: f64, cy: f64, radius: f64, upper: bool },
    /// Piecewise linear through points with strictly increasing x.
    Polyline { points: Vec<Point> },
}

impl Curve {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Curve::Const { value } => *value,
            Curve::Line { intercept, slope } => intercept + slope * x,
            Curve::EllipseArc { cx, half_len, cy, half_height, upper } => {
                let t = (x - cx) / half_len;
                let s = half_height * (1.0 - t * t).max(0.0).sqrt();
                if *upper { cy + s } else { cy - s }
            }
            Curve::StadiumArc { x0, x1, cy, radius, upper } => {
                let r = *radius;
                let dx = if x < x0 + r {
                    x0 + r - x
                } else if x > x1 - r {
                    x - (x1 - r)
                } else {
                    0.0
                };
                let s = (r * r - dx * dx).max(0.0).sqrt();
                if *upper { cy + s } else { cy - s }
            }
            Curve::Polyline { points } => {
                let n = points.len();
                if x <= points[0].x {
                    return points[0].y;
                }
                if x >= points[n - 1].x {
                    return points[n - 1].y;
                }
                let k = points.partition_point(|p| p.x <= x) - 1;
                let (p, q) = (points[k], points[k + 1]);
                p.y + (q.y - p.y) * (x - p.x) / (q.x - p.x)
            }
        }
    }

    /// Breakpoints of a piecewise-linear curve; `None` for curved pieces.
    fn breakpoints(&self) -> Option<Vec<f64>> {
        match self {
            Curve::Const { .. } | Curve::Line { .. } => Some(Vec::new()),
            Curve::Polyline { points } => Some(points.iter().map(|p| p.x).collect()),
            _ => None,
        }
    }
}

/// The pair `(f1, f2)` over `[a, b]`, with `f1` convex and `f2` concave.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunctionPair {
    pub a: f64,
    pub b: f64,
    pub lower: Curve,
    pub upper: Curve,
}

impl BoundaryFunctionPair {
    pub fn new(a: f64, b: f64, lower: Curve, upper: Curve) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidBoundary(format!("need a < b, got [{a}, {b}]")));
        }
        let pair = Self { a, b, lower, upper };
        let n = 1024;
        let xs: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
        let f1: Vec<f64> = xs.iter().map(|&x| pair.lower.eval(x)).collect();
        let f2: Vec<f64> = xs.iter().map(|&x| pair.upper.eval(x)).collect();
        let scale = f2.iter().chain(&f1).fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * scale;
        for k in 0..=n {
            if !(f1[k].is_finite() && f2[k].is_finite()) {
                return Err(Error::InvalidBoundary(format!("non-finite value at x = {}", xs[k])));
            }
            if f2[k] < f1[k] - tol {
                return Err(Error::InvalidBoundary(format!("f2 < f1 at x = {}", xs[k])));
            }
        }
        for k in 1..n {
            if f1[k - 1] - 2.0 * f1[k] + f1[k + 1] < -tol {
                return Err(Error::InvalidBoundary(format!("f1 not convex near x = {}", xs[k])));
            }
            if f2[k - 1] - 2.0 * f2[k] + f2[k + 1] > tol {
                return Err(Error::InvalidBoundary(format!("f2 not concave near x = {}", xs[k])));
            }
        }
        Ok(pair)
    }

    pub fn height(&self, x: f64) -> f64 {
        if x < self.a || x > self.b {
            return 0.0;
        }
        (self.upper.eval(x) - self.lower.eval(x)).max(0.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.a && x <= self.b && y >= self.lower.eval(x) && y <= self.upper.eval(x)
    }

    /// Boundary polygon: exact vertices for piecewise-linear pairs, otherwise
    /// samples clustered towards the endpoints where the arcs turn fastest.
    pub fn boundary_polygon(&self, n: usize) -> Vec<Point> {
        let xs = match (self.lower.breakpoints(), self.upper.breakpoints()) {
            (Some(mut l), Some(u)) => {
                l.extend(u);
                l.push(self.a);
                l.push(self.b);
                l.retain(|x| *x >= self.a && *x <= self.b);
                l.sort_by(f64::total_cmp);
                l.dedup();
                l
            }
            _ => (0..=n)
                .map(|k| {
                    let t = 0.5 * (1.0 - (PI * k as f64 / n as f64).cos());
                    self.a + (self.b - self.a) * t
                })
                .collect(),
        };
        let mut poly: Vec<Point> = xs.iter().map(|&x| Point::new(x, self.lower.eval(x))).collect();
        poly.extend(xs.iter().rev().map(|&x| Point::new(x, self.upper.eval(x))));
        poly
    }
}

/// Unnormalized input to [`normalize_domain`].
#[derive(Clone, Debug)]
pub enum RawDomain {
    Pair(BoundaryFunctionPair),
    /// Polygon vertices in boundary order.
    Polygon(Vec<Point>),
}

/// A normalized convex domain. `rotation` and `scale` record the similarity
/// applied to the input (rotation first, then scaling, then translation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexDomain {
    pub boundary: BoundaryFunctionPair,
    pub rotation: f64,
    pub scale: f64,
}

impl ConvexDomain {
    pub fn a(&self) -> f64 {
        self.boundary.a
    }

    pub fn b(&self) -> f64 {
        self.boundary.b
    }

    pub fn f1(&self, x: f64) -> f64 {
        self.boundary.lower.eval(x)
    }

    pub fn f2(&self, x: f64) -> f64 {
        self.boundary.upper.eval(x)
    }

    pub fn height(&self, x: f64) -> f64 {
        self.boundary.height(x)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.boundary.contains(x, y)
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.boundary.boundary_polygon(4096))
    }

    /// Builds a domain without normalizing. Intended for fixtures whose
    /// pair is already normalized by construction.
    pub fn from_normalized(boundary: BoundaryFunctionPair) -> Self {
        Self { boundary, rotation: 0.0, scale: 1.0 }
    }
}

const BOUNDARY_SAMPLES: usize = 4096;
const WIDTH_TIE: f64 = 1e-6;

/// Rotates and scales a convex input so that its minimal width is 1 and is
/// attained along the y axis, then translates so `min f1 = 0`.
///
/// Among directions of (near-)minimal width the one needing the smallest
/// rotation wins, with nonnegative angles preferred on ties.
pub fn normalize_domain(raw: &RawDomain) -> Result<ConvexDomain> {
    let (poly, tol) = match raw {
        RawDomain::Pair(p) => (p.boundary_polygon(BOUNDARY_SAMPLES), 1e-9),
        RawDomain::Polygon(v) => (v.clone(), 1e-6),
    };
    let area = polygon_area(&poly);
    if !(area > 1e-10) {
        return Err(Error::DegenerateInput { area });
    }
    let hull = convex_hull(&poly);
    if hull.len() < 3 {
        return Err(Error::DegenerateInput { area });
    }
    let defect = (polygon_area(&hull) - area) / area;
    if defect > tol {
        return Err(Error::NonConvexInput { defect, tol });
    }

    let mut candidates: Vec<(f64, f64)> = edge_widths(&hull)
        .into_iter()
        .map(|w| (normalize_half_turn(-w.edge_angle), w.width))
        .collect();
    candidates.push((0.0, width_along(&hull, FRAC_PI_2)));
    let w_min = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let (phi, _) = candidates
        .iter()
        .copied()
        .filter(|c| c.1 <= w_min * (1.0 + WIDTH_TIE))
        .min_by(|p, q| {
            p.0.abs()
                .total_cmp(&q.0.abs())
                .then((p.0 < 0.0).cmp(&(q.0 < 0.0)))
        })
        .expect("at least one candidate");

    if let RawDomain::Pair(pair) = raw {
        let y_lo = hull.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let y_hi = hull.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        if phi == 0.0 && (y_hi - y_lo - 1.0).abs() <= 1e-9 && y_lo.abs() <= 1e-9 {
            return Ok(ConvexDomain { boundary: pair.clone(), rotation: 0.0, scale: 1.0 });
        }
    }

    let rotated: Vec<Point> = hull.iter().map(|p| p.rotate(phi)).collect();
    let y_lo = rotated.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y_hi = rotated.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let x_lo = rotated.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let scale = 1.0 / (y_hi - y_lo);
    let mapped: Vec<Point> = rotated
        .iter()
        .map(|p| Point::new((p.x - x_lo) * scale, (p.y - y_lo) * scale))
        .collect();
    let boundary = split_chains(&convex_hull(&mapped))?;
    Ok(ConvexDomain { boundary, rotation: phi, scale })
}

/// Splits a counterclockwise convex hull into lower and upper graphs.
fn split_chains(hull: &[Point]) -> Result<BoundaryFunctionPair> {
    let n = hull.len();
    let by = |key: &dyn Fn(&Point) -> (f64, f64)| {
        (0..n)
            .min_by(|&i, &j| {
                let (a, b) = (key(&hull[i]), key(&hull[j]));
                a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
            })
            .unwrap()
    };
    let left_low = by(&|p| (p.x, p.y));
    let right_low = by(&|p| (-p.x, p.y));
    let right_high = by(&|p| (-p.x, -p.y));
    let left_high = by(&|p| (p.x, -p.y));
    let walk = |from: usize, to: usize| {
        let mut out = vec![hull[from]];
        let mut k = from;
        while k != to {
            k = (k + 1) % n;
            out.push(hull[k]);
        }
        out
    };
    let lower = walk(left_low, right_low);
    let mut upper = walk(right_high, left_high);
    upper.reverse();
    let a = hull[left_low].x;
    let b = hull[right_low].x;
    BoundaryFunctionPair::new(
        a,
        b,
        Curve::Polyline { points: lower },
        Curve::Polyline { points: upper },
    )
}

/// Samples of `h = f2 - f1` on a uniform grid. When the boundary pair is
/// available it is used for exact evaluation between samples; otherwise the
/// samples are interpolated with a monotone cubic.
#[derive(Clone, Debug)]
pub struct HeightProfile {
    pub xs: Vec<f64>,
    pub hs: Vec<f64>,
    exact: Option<BoundaryFunctionPair>,
    pchip: Pchip,
}

impl HeightProfile {
    pub fn from_samples(xs: Vec<f64>, hs: Vec<f64>) -> Result<Self> {
        if xs.len() < 3 || xs.len() != hs.len() {
            return Err(Error::BadParam("height profile needs at least 3 samples".into()));
        }
        let pchip = Pchip::new(xs.clone(), hs.clone());
        Ok(Self { xs, hs, exact: None, pchip })
    }

    pub fn a(&self) -> f64 {
        self.xs[0]
    }

    pub fn b(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn h_at(&self, x: f64) -> f64 {
        if x < self.a() || x > self.b() {
            return 0.0;
        }
        match &self.exact {
            Some(pair) => pair.height(x),
            None => self.pchip.eval(x).max(0.0),
        }
    }

    /// Location and value of the maximum of `h`.
    pub fn peak(&self) -> (f64, f64) {
        let k = (0..self.hs.len())
            .max_by(|&i, &j| self.hs[i].total_cmp(&self.hs[j]))
            .unwrap();
        let mut lo = self.xs[k.saturating_sub(1)];
        let mut hi = self.xs[(k + 1).min(self.xs.len() - 1)];
        for _ in 0..200 {
            if hi - lo <= 1e-14 * (1.0 + hi.abs()) {
                break;
            }
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if self.h_at(m1) < self.h_at(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let x = 0.5 * (lo + hi);
        let (hx, hk) = (self.h_at(x), self.hs[k]);
        if hk > hx { (self.xs[k], hk) } else { (x, hx) }
    }

    /// The superlevel interval `{h >= t}`, or `None` when it is empty.
    pub fn superlevel(&self, t: f64) -> Option<(f64, f64)> {
        let (xp, hp) = self.peak();
        if hp < t {
            return None;
        }
        let crossing = |inner: f64, outer: f64| {
            let (mut i, mut o) = (inner, outer);
            for _ in 0..100 {
                let m = 0.5 * (i + o);
                if m == i || m == o {
                    break;
                }
                if self.h_at(m) >= t { i = m } else { o = m }
            }
            i
        };
        let mut inner = xp;
        let mut left = self.a();
        for k in (0..self.xs.len()).rev().filter(|&k| self.xs[k] < xp) {
            if self.hs[k] < t {
                left = crossing(inner, self.xs[k]);
                break;
            }
            inner = self.xs[k];
        }
        let mut inner = xp;
        let mut right = self.b();
        for k in (0..self.xs.len()).filter(|&k| self.xs[k] > xp) {
            if self.hs[k] < t {
                right = crossing(inner, self.xs[k]);
                break;
            }
            inner = self.xs[k];
        }
        Some((left, right))
    }
}

/// Samples the height of a domain on `n_samples` uniform points.
pub fn height_profile(d: &ConvexDomain, n_samples: usize) -> Result<HeightProfile> {
    if n_samples < 16 {
        return Err(Error::BadParam(format!("height profile needs at least 16 samples, got {n_samples}")));
    }
    let (a, b) = (d.a(), d.b());
    let xs: Vec<f64> = (0..n_samples)
        .map(|k| a + (b - a) * k as f64 / (n_samples - 1) as f64)
        .collect();
    let hs: Vec<f64> = xs.iter().map(|&x| d.height(x)).collect();
    let mut hp = HeightProfile::from_samples(xs, hs)?;
    hp.exact = Some(d.boundary.clone());
    Ok(hp)
}

/// The length scale `L` with its witness interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthScale {
    pub l: f64,
    /// Interval of length `L` inside `{h >= 1 - L^-2}`; the leftmost one
    /// when the superlevel interval is strictly longer than `L`.
    pub witness: (f64, f64),
    /// The full superlevel interval at `1 - L^-2`.
    pub superlevel: (f64, f64),
    pub multiple_witnesses: bool,
}

impl LengthScale {
    pub fn center(&self) -> f64 {
        0.5 * (self.witness.0 + self.witness.1)
    }
}

/// Largest `L` whose superlevel interval `{h >= 1 - L^-2}` has length at
/// least `L`. The excess length is decreasing in `L`, so bisection applies.
pub fn length_scale(hp: &HeightProfile) -> Result<LengthScale> {
    let span = hp.b() - hp.a();
    let excess = |l: f64| match hp.superlevel(1.0 - 1.0 / (l * l)) {
        Some((lo, hi)) => hi - lo - l,
        None => -l,
    };
    let mut lo = 1e-6f64.min(0.5 * span);
    let mut hi = span;
    if excess(lo) < 0.0 {
        return Err(Error::DegenerateInput { area: 0.0 });
    }
    if excess(hi) >= 0.0 {
        lo = hi;
    } else {
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if excess(mid) >= 0.0 { lo = mid } else { hi = mid }
        }
    }
    let l = lo;
    let superlevel = hp
        .superlevel(1.0 - 1.0 / (l * l))
        .expect("nonempty at the bisection lower bound");
    let multiple_witnesses = superlevel.1 - superlevel.0 > l + 1e-6 * l.max(1.0);
    let witness = if multiple_witnesses {
        (superlevel.0, superlevel.0 + l)
    } else {
        superlevel
    };
    let inside = hp.xs.iter().filter(|&&x| x >= witness.0 && x <= witness.1).count();
    if inside < 4 {
        return Err(Error::ProfileTooCoarse(format!(
            "witness [{:.6}, {:.6}] contains {inside} samples",
            witness.0, witness.1
        )));
    }
    Ok(LengthScale { l, witness, superlevel, multiple_witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rectangle(w: f64) -> RawDomain {
        RawDomain::Pair(
            BoundaryFunctionPair::new(0.0, w, Curve::Const { value: 0.0 }, Curve::Const { value: 1.0 })
                .unwrap(),
        )
    }

    #[test]
    fn rectangle_is_already_normalized() {
        let d = normalize_domain(&rectangle(4.0)).unwrap();
        assert_eq!(d.rotation, 0.0);
        assert_eq!(d.scale, 1.0);
        assert_eq!((d.a(), d.b()), (0.0, 4.0));
        let hp = height_profile(&d, 1025).unwrap();
        let ls = length_scale(&hp).unwrap();
        assert_eq!(ls.l, 4.0);
    }

    #[test]
    fn rotated_rectangle_is_turned_back() {
        let poly = vec![
            Point::new(-1.0, 0.0),
            Point::new(0.0, 0.0),
            Point::new(0.0, 4.0),
            Point::new(-1.0, 4.0),
        ];
        let d = normalize_domain(&RawDomain::Polygon(poly)).unwrap();
        assert!((d.rotation.abs() - FRAC_PI_2).abs() < 1e-12);
        assert!((d.b() - d.a() - 4.0).abs() < 1e-12);
        assert!((d.f2(2.0) - 1.0).abs() < 1e-12 && d.f1(2.0).abs() < 1e-12);
    }

    #[test]
    fn non_convex_polygon_is_rejected() {
        let poly = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(1.0, 0.5),
            Point::new(0.0, 2.0),
        ];
        assert!(matches!(
            normalize_domain(&RawDomain::Polygon(poly)),
            Err(Error::NonConvexInput { .. })
        ));
    }

    #[test]
    fn degenerate_polygon_is_rejected() {
        let poly = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert!(matches!(
            normalize_domain(&RawDomain::Polygon(poly)),
            Err(Error::DegenerateInput { .. })
        ));
    }

    #[test]
    fn concave_lower_boundary_is_rejected() {
        let r = BoundaryFunctionPair::new(
            0.0,
            1.0,
            Curve::EllipseArc { cx: 0.5, half_len: 0.5, cy: 0.0, half_height: 0.2, upper: true },
            Curve::Const { value: 1.0 },
        );
        assert!(matches!(r, Err(Error::InvalidBoundary(_))));
    }

    #[test]
    fn disk_keeps_its_analytic_form() {
        let pair = BoundaryFunctionPair::new(
            0.0,
            1.0,
            Curve::EllipseArc { cx: 0.5, half_len: 0.5, cy: 0.5, half_height: 0.5, upper: false },
            Curve::EllipseArc { cx: 0.5, half_len: 0.5, cy: 0.5, half_height: 0.5, upper: true },
        )
        .unwrap();
        let d = normalize_domain(&RawDomain::Pair(pair.clone())).unwrap();
        assert_eq!(d.boundary, pair);
    }

    #[test]
    fn triangle_length_scale() {
        // h(x) = x / 64 on [0, 64]: the interval {h >= 1 - L^-2} has length 64 / L^2.
        let pair = BoundaryFunctionPair::new(
            0.0,
            64.0,
            Curve::Const { value: 0.0 },
            Curve::Line { intercept: 0.0, slope: 1.0 / 64.0 },
        )
        .unwrap();
        let d = ConvexDomain::from_normalized(pair);
        let ls = length_scale(&height_profile(&d, 8193).unwrap()).unwrap();
        assert!((ls.l - 4.0).abs() < 1e-10, "L = {}", ls.l);
        assert!((ls.witness.1 - 64.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_samples_in_witness() {
        let pair = BoundaryFunctionPair::new(
            0.0,
            64.0,
            Curve::Const { value: 0.0 },
            Curve::Line { intercept: 0.0, slope: 1.0 / 64.0 },
        )
        .unwrap();
        let d = ConvexDomain::from_normalized(pair);
        assert!(matches!(
            length_scale(&height_profile(&d, 17).unwrap()),
            Err(Error::ProfileTooCoarse(_))
        ));
        assert!(matches!(height_profile(&d, 15), Err(Error::BadParam(_))));
    }

    #[test]
    fn pchip_profile_matches_exact_length_scale() {
        let pair = BoundaryFunctionPair::new(
            -8.0,
            8.0,
            Curve::EllipseArc { cx: 0.0, half_len: 8.0, cy: 0.5, half_height: 0.5, upper: false },
            Curve::EllipseArc { cx: 0.0, half_len: 8.0, cy: 0.5, half_height: 0.5, upper: true },
        )
        .unwrap();
        let d = ConvexDomain::from_normalized(pair);
        let exact = height_profile(&d, 8193).unwrap();
        let sampled = HeightProfile::from_samples(exact.xs.clone(), exact.hs.clone()).unwrap();
        let (l1, l2) = (length_scale(&exact).unwrap().l, length_scale(&sampled).unwrap().l);
        assert!((l1 - l2).abs() < 1e-6, "{l1} vs {l2}");
    }

    proptest! {
        #[test]
        fn normalization_invariants(
            pts in proptest::collection::vec((0.0f64..5.0, 0.0f64..3.0), 6..30),
            angle in -1.5f64..1.5,
        ) {
            let poly: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y).rotate(angle)).collect();
            let hull = convex_hull(&poly);
            prop_assume!(hull.len() >= 3 && polygon_area(&hull) > 0.1);
            let d = normalize_domain(&RawDomain::Polygon(hull)).unwrap();
            let poly = d.boundary.boundary_polygon(0);
            let ys: Vec<f64> = poly.iter().map(|p| p.y).collect();
            let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(y_min.abs() < 1e-9);
            prop_assert!((y_max - 1.0).abs() < 1e-9);
            let hull = convex_hull(&poly);
            let w = edge_widths(&hull).iter().map(|w| w.width).fold(f64::INFINITY, f64::min);
            prop_assert!((w - 1.0).abs() < 1e-6, "w = {}", w);
        }
    }
}
