//! Superlevel sets `{u >= c}` by marching squares, and the shape statistics
//! near the maximum: projections, enclosing rectangles, convexity defect.

use crate::error::{Error, Result};
use crate::geometry::{
    convex_hull, min_area_rect, point_in_polygon, polygon_area, signed_area, EnclosingRect, Point,
};
use crate::grid::Grid2D;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Minimum number of cells fully inside the superlevel set.
const MIN_CELLS: usize = 16;

/// Orientation is only meaningful for visibly elongated level sets.
pub const MIN_ASPECT_FOR_ANGLE: f64 = 1.5;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelPolygon {
    pub c: f64,
    /// Counterclockwise, closed implicitly (last vertex connects to first).
    pub vertices: Vec<Point>,
    pub area: f64,
    pub convexity_defect: f64,
    /// Length of the projection onto the x axis.
    pub proj_x: f64,
    pub proj_y: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub mer: EnclosingRect,
    pub contains_max: bool,
}

impl LevelPolygon {
    pub fn aspect(&self) -> f64 {
        self.mer.side_long / self.mer.side_short
    }
}

type EdgeKey = (i32, i32, u8);

/// Extracts the boundary of `{u >= c}` as one closed polygon.
pub fn extract_superlevel(g: &Grid2D, u: &[f64], c: f64, max_at: (f64, f64)) -> Result<LevelPolygon> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::BadParam(format!("level must lie in (0, 1), got {c}")));
    }
    let val = |i: i32, j: i32| g.lattice_value(u, i as isize, j as isize);
    let point = |k: EdgeKey| {
        let (i, j, vertical) = k;
        let (a, b) = if vertical == 0 { (val(i, j), val(i + 1, j)) } else { (val(i, j), val(i, j + 1)) };
        let t = (c - a) / (b - a);
        let (x, y) = (g.x_of(0) + i as f64 * g.delta, g.y_of(0) + j as f64 * g.delta);
        if vertical == 0 { Point::new(x + t * g.delta, y) } else { Point::new(x, y + t * g.delta) }
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    let mut full_cells = 0usize;
    for i in -1..g.nx as i32 {
        for j in -1..g.ny as i32 {
            let v = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            let above = v.map(|x| x >= c);
            let mask = above.iter().enumerate().fold(0u8, |m, (k, &a)| m | ((a as u8) << k));
            if mask == 0b1111 {
                full_cells += 1;
                continue;
            }
            if mask == 0 {
                continue;
            }
            let bottom = (i, j, 0u8);
            let right = (i + 1, j, 1u8);
            let top = (i, j + 1, 0u8);
            let left = (i, j, 1u8);
            // edges around each corner: 0 bottom-left, 1 bottom-right,
            // 2 top-right, 3 top-left
            let around = [(bottom, left), (bottom, right), (right, top), (top, left)];
            match mask {
                0b0101 | 0b1010 => {
                    let centre_high = 0.25 * v.iter().sum::<f64>() >= c;
                    // isolate the corners that are not joined through the centre
                    let isolated = if (mask == 0b0101) == centre_high { [1, 3] } else { [0, 2] };
                    for k in isolated {
                        segments.push(around[k]);
                    }
                }
                _ => {
                    let crossed: Vec<EdgeKey> = [
                        (bottom, above[0] != above[1]),
                        (right, above[1] != above[2]),
                        (top, above[2] != above[3]),
                        (left, above[3] != above[0]),
                    ]
                    .iter()
                    .filter(|e| e.1)
                    .map(|e| e.0)
                    .collect();
                    segments.push((crossed[0], crossed[1]));
                }
            }
        }
    }
    if full_cells < MIN_CELLS {
        return Err(Error::LevelTooHigh { c, cells: full_cells });
    }

    let mut incident: HashMap<EdgeKey, Vec<usize>> = HashMap::with_capacity(2 * segments.len());
    for (s, &(p, q)) in segments.iter().enumerate() {
        incident.entry(p).or_default().push(s);
        incident.entry(q).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut loops: Vec<Vec<Point>> = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut cur) = segments[start];
        let mut pts = vec![point(first)];
        while cur != first {
            pts.push(point(cur));
            let next = incident[&cur].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break };
            used[s] = true;
            let (p, q) = segments[s];
            cur = if p == cur { q } else { p };
        }
        loops.push(pts);
    }
    if loops.len() != 1 {
        return Err(Error::MultipleComponents { c, loops: loops.len() });
    }
    let mut vertices = loops.pop().unwrap();
    if signed_area(&vertices) < 0.0 {
        vertices.reverse();
    }

    let area = polygon_area(&vertices);
    let hull = convex_hull(&vertices);
    let convexity_defect = (polygon_area(&hull) - area) / area;
    let mer = min_area_rect(&hull).expect("hull of a nondegenerate loop");
    let contains_max = point_in_polygon(&vertices, Point::new(max_at.0, max_at.1));
    let x_range = field_extent(g, u, c, true);
    let y_range = field_extent(g, u, c, false);
    Ok(LevelPolygon {
        c,
        vertices,
        area,
        convexity_defect,
        proj_x: x_range.1 - x_range.0,
        proj_y: y_range.1 - y_range.0,
        x_range,
        y_range,
        mer,
        contains_max,
    })
}

/// Extent of `{u >= c}` along x (or y) from lattice line scans: each
/// crossing is located on the quadratic through three nodes, and the extreme
/// over lines is refined by a parabola through the three best lines.
fn field_extent(g: &Grid2D, u: &[f64], c: f64, along_x: bool) -> (f64, f64) {
    let (lines, len) = if along_x { (g.ny, g.nx) } else { (g.nx, g.ny) };
    let at = |line: usize, k: isize| -> Option<f64> {
        let (i, j) = if along_x { (k, line as isize) } else { (line as isize, k) };
        g.node_at(i, j).map(|n| u[n])
    };
    let value = |line: usize, k: isize| at(line, k).unwrap_or(0.0);
    // offset (in cells) of the crossing between k and k + dir
    let crossing = |line: usize, k: isize, dir: isize| -> f64 {
        let (v0, v1) = (value(line, k), value(line, k + dir));
        let linear = (v0 - c) / (v0 - v1);
        let Some(vb) = at(line, k - dir) else { return linear };
        if at(line, k + dir).is_none() {
            return linear;
        }
        // q(t) through t = -1, 0, 1 with values vb, v0, v1
        let a2 = 0.5 * (v1 + vb) - v0;
        let a1 = 0.5 * (v1 - vb);
        let a0 = v0 - c;
        if a2.abs() < 1e-14 * v0.abs() {
            return linear;
        }
        let disc = a1 * a1 - 4.0 * a2 * a0;
        if disc < 0.0 {
            return linear;
        }
        let sq = disc.sqrt();
        [(-a1 + sq) / (2.0 * a2), (-a1 - sq) / (2.0 * a2)]
            .into_iter()
            .filter(|t| (-1e-12..=1.0 + 1e-12).contains(t))
            .reduce(f64::min)
            .map_or(linear, |t| t.clamp(0.0, 1.0))
    };
    let mut lo_end: Vec<Option<f64>> = vec![None; lines];
    let mut hi_end: Vec<Option<f64>> = vec![None; lines];
    for line in 0..lines {
        let inside: Vec<isize> = (0..len as isize).filter(|&k| value(line, k) >= c).collect();
        let (Some(&kl), Some(&kr)) = (inside.first(), inside.last()) else { continue };
        hi_end[line] = Some(kr as f64 + crossing(line, kr, 1));
        lo_end[line] = Some(kl as f64 - crossing(line, kl, -1));
    }
    let refine = |ends: &[Option<f64>], sign: f64| -> f64 {
        let best = (0..lines)
            .filter(|&l| ends[l].is_some())
            .max_by(|&a, &b| (sign * ends[a].unwrap()).total_cmp(&(sign * ends[b].unwrap())))
            .expect("superlevel set is nonempty");
        let e0 = sign * ends[best].unwrap();
        if best == 0 || best + 1 >= lines {
            return sign * e0;
        }
        match (ends[best - 1], ends[best + 1]) {
            (Some(em), Some(ep)) => {
                let (em, ep) = (sign * em, sign * ep);
                let curv = em - 2.0 * e0 + ep;
                let t = if curv < 0.0 { 0.5 * (em - ep) / curv } else { f64::INFINITY };
                if t.abs() <= 1.0 {
                    sign * (e0 - 0.125 * (ep - em) * (ep - em) / curv)
                } else {
                    sign * e0
                }
            }
            _ => sign * e0,
        }
    };
    let (lo, hi) = (refine(&lo_end, -1.0), refine(&hi_end, 1.0));
    let (origin, d) = if along_x { (g.x_of(0), g.delta) } else { (g.y_of(0), g.delta) };
    (origin + lo * d, origin + hi * d)
}

/// Levels `1 - eps` must be resolved by at least twelve cells across the
/// short axis, whose length scales like `sqrt(eps)`.
pub fn eps_resolvable(eps: f64, delta: f64) -> bool {
    eps.sqrt() >= 12.0 * delta
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub eps: f64,
    pub polygon: LevelPolygon,
    /// `|I^x| / (sqrt(eps) L)`
    pub ratio_x: f64,
    /// `|I^y| / sqrt(eps)`
    pub ratio_y: f64,
    /// Angular distance of the enclosing rectangle from the axes.
    pub mer_angle: f64,
    pub orientation_defined: bool,
    /// `|centre_x - x*| / (sqrt(eps) L)` for the enclosing rectangle.
    pub center_offset: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeProfile {
    pub entries: Vec<ShapeEntry>,
    pub spread_x: f64,
    pub spread_y: f64,
    /// Largest orientation angle over `eps <= 1/4` where orientation is defined.
    pub max_angle: f64,
}

pub fn shape_profile(
    g: &Grid2D,
    u: &[f64],
    max_at: (f64, f64),
    l: f64,
    eps_list: &[f64],
) -> Result<ShapeProfile> {
    let mut entries = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(Error::BadParam(format!("eps {eps} outside (0, 1/2]")));
        }
        if !eps_resolvable(eps, g.delta) {
            return Err(Error::BadParam(format!(
                "eps {eps} is below the resolvable minimum {:.3e} at spacing {}",
                (12.0 * g.delta).powi(2),
                g.delta
            )));
        }
        let polygon = extract_superlevel(g, u, 1.0 - eps, max_at)?;
        let s = eps.sqrt();
        entries.push(ShapeEntry {
            eps,
            ratio_x: polygon.proj_x / (s * l),
            ratio_y: polygon.proj_y / s,
            mer_angle: polygon.mer.axis_deviation(),
            orientation_defined: polygon.aspect() >= MIN_ASPECT_FOR_ANGLE,
            center_offset: (polygon.mer.center.x - max_at.0).abs() / (s * l),
            polygon,
        });
    }
    let spread = |f: &dyn Fn(&ShapeEntry) -> f64| {
        let hi = entries.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let lo = entries.iter().map(f).fold(f64::INFINITY, f64::min);
        hi / lo
    };
    let spread_x = spread(&|e| e.ratio_x);
    let spread_y = spread(&|e| e.ratio_y);
    let max_angle = entries
        .iter()
        .filter(|e| e.eps <= 0.25 && e.orientation_defined)
        .map(|e| e.mer_angle)
        .fold(0.0, f64::max);
    Ok(ShapeProfile { entries, spread_x, spread_y, max_angle })
}
