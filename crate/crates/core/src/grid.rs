//! Uniform lattice restricted to a convex domain, with the fractional arm
//! lengths needed by the Shortley–Weller stencil.

use crate::domain::{height_profile, length_scale, ConvexDomain};
use crate::error::{Error, Result};
use crate::geometry::Point;

pub const EAST: usize = 0;
pub const WEST: usize = 1;
pub const NORTH: usize = 2;
pub const SOUTH: usize = 3;

/// Marks a missing neighbour (the arm ends on the boundary).
pub const NONE: u32 = u32::MAX;

/// Nodes closer than this fraction of a cell to the boundary (along a
/// lattice direction) are not treated as interior.
const CLEARANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridOptions {
    /// Largest accepted spacing; `None` disables the cap.
    pub max_delta: Option<f64>,
    /// Minimum interior nodes per lattice column over the witness interval.
    pub min_column_nodes: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { max_delta: Some(1.0 / 32.0), min_column_nodes: 8 }
    }
}

impl GridOptions {
    /// For small test fixtures: no spacing cap, two nodes per column.
    pub fn relaxed() -> Self {
        Self { max_delta: None, min_column_nodes: 2 }
    }
}

#[derive(Clone, Debug)]
pub struct Grid2D {
    pub delta: f64,
    /// Lattice origin `(a, min f1)`; nested grids share it.
    pub origin: Point,
    pub nx: usize,
    pub ny: usize,
    pub domain: ConvexDomain,
    pub l: f64,
    pub witness: (f64, f64),
    /// Lattice coordinates `(i, j)` of each node, column-major in x.
    pub ij: Vec<(u32, u32)>,
    /// Arm lengths as fractions of `delta`, indexed by direction.
    pub arms: Vec<[f64; 4]>,
    pub nbrs: Vec<[u32; 4]>,
    lattice: Vec<u32>,
    col_start: Vec<usize>,
}

impl Grid2D {
    pub fn len(&self) -> usize {
        self.ij.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ij.is_empty()
    }

    pub fn x_of(&self, i: usize) -> f64 {
        self.origin.x + i as f64 * self.delta
    }

    pub fn y_of(&self, j: usize) -> f64 {
        self.origin.y + j as f64 * self.delta
    }

    pub fn xy(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.ij[node];
        (self.x_of(i as usize), self.y_of(j as usize))
    }

    /// Node at lattice position `(i, j)`, if interior.
    pub fn node_at(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        match self.lattice[i as usize * self.ny + j as usize] {
            NONE => None,
            n => Some(n as usize),
        }
    }

    /// Nodes of lattice column `i`, contiguous and ordered by `j`.
    pub fn column(&self, i: usize) -> std::ops::Range<usize> {
        self.col_start[i]..self.col_start[i + 1]
    }

    /// Lattice value of a nodal field; zero off the interior.
    pub fn lattice_value(&self, values: &[f64], i: isize, j: isize) -> f64 {
        self.node_at(i, j).map_or(0.0, |n| values[n])
    }

    /// Lattice column containing `x`, rounding to the nearest line.
    pub fn column_index(&self, x: f64) -> Option<usize> {
        let t = ((x - self.origin.x) / self.delta).round();
        (t >= 0.0 && (t as usize) < self.nx).then_some(t as usize)
    }
}

/// Builds the interior lattice of `d` at spacing `delta`.
pub fn build_grid(d: &ConvexDomain, delta: f64, opts: GridOptions) -> Result<Grid2D> {
    if !(delta > 0.0) {
        return Err(Error::BadParam(format!("grid spacing must be positive, got {delta}")));
    }
    if let Some(max) = opts.max_delta {
        if delta > max {
            return Err(Error::GridTooCoarse(format!("spacing {delta} exceeds {max}")));
        }
    }
    let ls = length_scale(&height_profile(d, 4097)?)?;
    let (a, b) = (d.a(), d.b());
    let poly = d.boundary.boundary_polygon(2048);
    let y_lo = poly.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y_hi = poly.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let nx = ((b - a) / delta + 1e-9).floor() as usize + 1;
    let ny = ((y_hi - y_lo) / delta + 1e-9).floor() as usize + 1;
    let origin = Point::new(a, y_lo);
    let m = CLEARANCE * delta;

    let mut lattice = vec![NONE; nx * ny];
    let mut ij = Vec::new();
    let mut col_start = Vec::with_capacity(nx + 1);
    for i in 0..nx {
        col_start.push(ij.len());
        let x = origin.x + i as f64 * delta;
        if x - m <= a || x + m >= b {
            continue;
        }
        let (lo, hi) = (d.f1(x), d.f2(x));
        for j in 0..ny {
            let y = origin.y + j as f64 * delta;
            if y - m <= lo || y + m >= hi {
                continue;
            }
            if d.contains(x - m, y) && d.contains(x + m, y) {
                lattice[i * ny + j] = ij.len() as u32;
                ij.push((i as u32, j as u32));
            }
        }
    }
    col_start.push(ij.len());
    if ij.is_empty() {
        return Err(Error::GridTooCoarse("no interior nodes".into()));
    }

    let at = |i: isize, j: isize| -> u32 {
        if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
            NONE
        } else {
            lattice[i as usize * ny + j as usize]
        }
    };
    let horizontal_arm = |x: f64, y: f64, dir: f64| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if d.contains(x + dir * mid * delta, y) { lo = mid } else { hi = mid }
        }
        (0.5 * (lo + hi)).min(1.0)
    };
    let mut arms = Vec::with_capacity(ij.len());
    let mut nbrs = Vec::with_capacity(ij.len());
    for &(i, j) in &ij {
        let (i, j) = (i as isize, j as isize);
        let x = origin.x + i as f64 * delta;
        let y = origin.y + j as f64 * delta;
        let nb = [at(i + 1, j), at(i - 1, j), at(i, j + 1), at(i, j - 1)];
        let mut th = [1.0; 4];
        if nb[EAST] == NONE {
            th[EAST] = horizontal_arm(x, y, 1.0);
        }
        if nb[WEST] == NONE {
            th[WEST] = horizontal_arm(x, y, -1.0);
        }
        if nb[NORTH] == NONE {
            th[NORTH] = ((d.f2(x) - y) / delta).min(1.0);
        }
        if nb[SOUTH] == NONE {
            th[SOUTH] = ((y - d.f1(x)) / delta).min(1.0);
        }
        arms.push(th);
        nbrs.push(nb);
    }

    let grid = Grid2D {
        delta,
        origin,
        nx,
        ny,
        domain: d.clone(),
        l: ls.l,
        witness: ls.witness,
        ij,
        arms,
        nbrs,
        lattice,
        col_start,
    };
    check_connected(&grid)?;
    for i in 0..nx {
        let x = grid.x_of(i);
        if x < ls.witness.0 || x > ls.witness.1 || x <= a + m || x >= b - m {
            continue;
        }
        let count = grid.column(i).len();
        if count < opts.min_column_nodes {
            return Err(Error::GridTooCoarse(format!(
                "column at x = {x:.6} has {count} interior nodes, need {}",
                opts.min_column_nodes
            )));
        }
    }
    Ok(grid)
}

fn check_connected(g: &Grid2D) -> Result<()> {
    let mut seen = vec![false; g.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(n) = stack.pop() {
        for &nb in &g.nbrs[n] {
            if nb != NONE && !seen[nb as usize] {
                seen[nb as usize] = true;
                reached += 1;
                stack.push(nb as usize);
            }
        }
    }
    if reached == g.len() {
        Ok(())
    } else {
        Err(Error::GridTooCoarse(format!("interior lattice is disconnected ({reached} of {} nodes reachable)", g.len())))
    }
}
