//! First transverse Fourier mode: `e(x, y) = sqrt(2/h) sin(pi (y - f1) / h)`,
//! the projection `psi(x) = int u e dy`, the split `u = psi e + u2`, and the
//! one-dimensional residual of `psi`.

use crate::domain::{ConvexDomain, LengthScale};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, EAST, NONE, NORTH, SOUTH, WEST};
use crate::interp::Pchip;
use crate::ode::{OdeOperator, H_FLOOR};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Columns inside the witness interval need this many nodes for the
/// vertical quadrature to be meaningful.
pub const MIN_COLUMN_NODES: usize = 8;

pub fn transverse_mode(d: &ConvexDomain, x: f64, y: f64) -> Result<f64> {
    if x < d.a() || x > d.b() {
        return Err(Error::OutsideDomain { x, y });
    }
    let (f1, f2) = (d.f1(x), d.f2(x));
    let h = f2 - f1;
    if y < f1 || y > f2 || h < H_FLOOR {
        return Err(Error::OutsideDomain { x, y });
    }
    Ok((2.0 / h).sqrt() * (PI * (y - f1) / h).sin())
}

/// `psi` sampled on the lattice columns that contain interior nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FirstMode {
    pub delta: f64,
    pub columns: Vec<usize>,
    pub xs: Vec<f64>,
    pub psi: Vec<f64>,
}

impl FirstMode {
    /// `x_bar`: the maximum of `psi`, refined by a three-point parabola.
    pub fn argmax(&self) -> f64 {
        let n = self.psi.len();
        let k = (0..n).max_by(|&i, &j| self.psi[i].total_cmp(&self.psi[j])).unwrap();
        if k == 0 || k + 1 == n {
            return self.xs[k];
        }
        let (pm, p0, pp) = (self.psi[k - 1], self.psi[k], self.psi[k + 1]);
        let curv = pm - 2.0 * p0 + pp;
        if curv < 0.0 { self.xs[k] + 0.5 * self.delta * (pm - pp) / curv } else { self.xs[k] }
    }

    /// Monotone-cubic resampling, e.g. onto the 1-D operator grid.
    pub fn resample(&self, xs: &[f64]) -> Vec<f64> {
        let p = Pchip::new(self.xs.clone(), self.psi.clone());
        let (lo, hi) = (self.xs[0], self.xs[self.xs.len() - 1]);
        xs.iter().map(|&x| if x < lo || x > hi { 0.0 } else { p.eval(x) }).collect()
    }

    /// Central-difference `psi'` at the interior samples, paired with x.
    pub fn derivative(&self) -> Vec<(f64, f64)> {
        (1..self.psi.len().saturating_sub(1))
            .map(|k| (self.xs[k], (self.psi[k + 1] - self.psi[k - 1]) / (2.0 * self.delta)))
            .collect()
    }
}

/// Integral of `u e` over one vertical slice. Simpson on the uniform interior
/// nodes (3/8 rule on the last three intervals when their count is odd), and
/// on each cut cell the quadratic through the boundary zero and the two
/// nearest nodes.
fn column_integral(delta: f64, g: &[f64], gap_lo: f64, gap_hi: f64) -> f64 {
    let m = g.len();
    if m == 1 {
        return 0.5 * g[0] * (gap_lo + gap_hi);
    }
    let end = |l: f64, g0: f64, g1: f64| {
        // q(t) = alpha t + beta t^2 through (l, g0) and (l + delta, g1)
        let beta = (g1 / (l + delta) - g0 / l) / delta;
        let alpha = g0 / l - beta * l;
        alpha * l * l / 2.0 + beta * l * l * l / 3.0
    };
    let mut s = end(gap_lo, g[0], g[1]) + end(gap_hi, g[m - 1], g[m - 2]);
    let intervals = m - 1;
    let simpson = |g: &[f64]| {
        let n = g.len() - 1;
        let mut acc = g[0] + g[n];
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 * g[k] } else { 2.0 * g[k] };
        }
        acc * delta / 3.0
    };
    if intervals == 1 {
        s += 0.5 * delta * (g[0] + g[1]);
    } else if intervals.is_multiple_of(2) {
        s += simpson(g);
    } else if intervals == 3 {
        s += 3.0 * delta / 8.0 * (g[0] + 3.0 * g[1] + 3.0 * g[2] + g[3]);
    } else {
        s += simpson(&g[..m - 3]);
        let t = &g[m - 4..];
        s += 3.0 * delta / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3]);
    }
    s
}

/// Projects `u` onto the first transverse mode column by column.
pub fn project_first_mode(g: &Grid2D, u: &[f64]) -> Result<FirstMode> {
    let d = &g.domain;
    let mut out = FirstMode { delta: g.delta, columns: Vec::new(), xs: Vec::new(), psi: Vec::new() };
    let mut vals = Vec::new();
    for i in 0..g.nx {
        let col = g.column(i);
        if col.is_empty() {
            continue;
        }
        let x = g.x_of(i);
        if x >= g.witness.0 && x <= g.witness.1 && col.len() < MIN_COLUMN_NODES {
            return Err(Error::ColumnTooThin { x, nodes: col.len() });
        }
        let (f1, f2) = (d.f1(x), d.f2(x));
        let h = f2 - f1;
        if h < H_FLOOR {
            continue;
        }
        let norm = (2.0 / h).sqrt();
        vals.clear();
        for n in col.clone() {
            let (_, y) = g.xy(n);
            vals.push(u[n] * norm * (PI * (y - f1) / h).sin());
        }
        let (first, last) = (col.start, col.end - 1);
        let gap_lo = g.arms[first][SOUTH] * g.delta;
        let gap_hi = g.arms[last][NORTH] * g.delta;
        out.columns.push(i);
        out.xs.push(x);
        out.psi.push(column_integral(g.delta, &vals, gap_lo, gap_hi));
    }
    if out.psi.len() < 3 {
        return Err(Error::GridTooCoarse("fewer than three columns for the mode projection".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeDecomposition {
    pub first: FirstMode,
    pub x_bar: f64,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

/// `u1 = psi e` on every node of a projected column (zero elsewhere) and
/// `u2 = u - u1`.
pub fn decompose(g: &Grid2D, u: &[f64]) -> Result<ModeDecomposition> {
    let first = project_first_mode(g, u)?;
    let mut u1 = vec![0.0; u.len()];
    for (k, &i) in first.columns.iter().enumerate() {
        let x = g.x_of(i);
        for n in g.column(i) {
            let (_, y) = g.xy(n);
            u1[n] = first.psi[k] * transverse_mode(&g.domain, x, y)?;
        }
    }
    let u2 = u.iter().zip(&u1).map(|(a, b)| a - b).collect();
    let x_bar = first.argmax();
    Ok(ModeDecomposition { first, x_bar, u1, u2 })
}

/// The interval `J`: the witness interval of `L` cut down to
/// `|x - x_bar| <= L / c_j`.
pub fn property_interval(ls: &LengthScale, x_bar: f64, c_j: f64) -> (f64, f64) {
    let r = ls.l / c_j;
    let lo = ls.witness.0.max(x_bar - r);
    let hi = ls.witness.1.min(x_bar + r);
    if lo <= hi { (lo, hi) } else { (x_bar, x_bar) }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sigma {
    pub xs: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `(lo, hi, int |sigma|)` over consecutive unit pieces of `J`.
    pub unit_integrals: Vec<(f64, f64, f64)>,
}

impl Sigma {
    pub fn max_unit_integral(&self) -> f64 {
        self.unit_integrals.iter().map(|p| p.2).fold(0.0, f64::max)
    }
}

/// `sigma = psi'' - (V - mu) psi` at the interior samples of a uniform grid,
/// with `V` taken from the operator's height profile.
pub fn residual_sigma(xs: &[f64], psi: &[f64], op: &OdeOperator, mu: f64, j: (f64, f64)) -> Sigma {
    let n = xs.len();
    let dx = if n > 1 { xs[1] - xs[0] } else { 1.0 };
    let mut sx = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for k in 1..n.saturating_sub(1) {
        let v = op.potential_at(xs[k]);
        if !v.is_finite() {
            continue;
        }
        let d2 = (psi[k + 1] - 2.0 * psi[k] + psi[k - 1]) / (dx * dx);
        sx.push(xs[k]);
        sigma.push(d2 - (v - mu) * psi[k]);
    }
    let mut unit_integrals = Vec::new();
    let mut lo = j.0;
    while lo < j.1 || unit_integrals.is_empty() {
        let hi = (lo + 1.0).min(j.1);
        let s: f64 = sx
            .iter()
            .zip(&sigma)
            .filter(|(x, _)| **x >= lo && (**x < hi || (hi == j.1 && **x <= hi)))
            .map(|(_, s)| s.abs() * dx)
            .sum();
        unit_integrals.push((lo, hi, s));
        if hi >= j.1 {
            break;
        }
        lo = hi;
    }
    Sigma { xs: sx, sigma, unit_integrals }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemainderNorms {
    pub sup_u2: f64,
    /// `(patch centre x, ||grad u2||_L2 over the unit-width patch)`.
    pub patches: Vec<(f64, f64)>,
}

impl RemainderNorms {
    pub fn max_patch(&self) -> f64 {
        self.patches.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

/// Sup of `|u2|` over nodes in the witness interval and the gradient norm of
/// `u2` over unit-width patches `|x - x1| <= 1/2` centred along `J`.
pub fn mode_remainder_norms(g: &Grid2D, u2: &[f64], j: (f64, f64)) -> RemainderNorms {
    let sup_u2 = (0..g.len())
        .filter(|&n| {
            let x = g.xy(n).0;
            x >= g.witness.0 && x <= g.witness.1
        })
        .map(|n| u2[n].abs())
        .fold(0.0, f64::max);
    let grad2: Vec<f64> = (0..g.len())
        .map(|n| {
            let diff = |plus: usize, minus: usize| {
                let val = |dir: usize| {
                    let nb = g.nbrs[n][dir];
                    if nb == NONE { 0.0 } else { u2[nb as usize] }
                };
                (val(plus) - val(minus)) / ((g.arms[n][plus] + g.arms[n][minus]) * g.delta)
            };
            let (gx, gy) = (diff(EAST, WEST), diff(NORTH, SOUTH));
            gx * gx + gy * gy
        })
        .collect();
    let mut centres = Vec::new();
    if j.1 - j.0 < 1.0 {
        centres.push(0.5 * (j.0 + j.1));
    } else {
        let mut c = j.0 + 0.5;
        while c + 0.5 <= j.1 + 1e-9 {
            centres.push(c);
            c += 1.0;
        }
    }
    let patches = centres
        .into_iter()
        .map(|c| {
            let s: f64 = (0..g.len())
                .filter(|&n| (g.xy(n).0 - c).abs() <= 0.5)
                .map(|n| grad2[n])
                .sum();
            (c, (s * g.delta * g.delta).sqrt())
        })
        .collect();
    RemainderNorms { sup_u2, patches }
}

/// Smallest `C >= 1` with `|psi'(x)| >= L^-2 |x - x_bar| / C - C L^-3` at
/// every sample of the witness interval; infinite if none up to 1e6.
pub fn psi_growth_constant(first: &FirstMode, x_bar: f64, ls: &LengthScale) -> f64 {
    let pts: Vec<(f64, f64)> = first
        .derivative()
        .into_iter()
        .filter(|(x, _)| *x >= ls.witness.0 && *x <= ls.witness.1)
        .collect();
    let l = ls.l;
    let holds = |c: f64| {
        pts.iter()
            .all(|(x, dp)| dp.abs() >= (x - x_bar).abs() / (c * l * l) - c / (l * l * l))
    };
    if holds(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (1.0f64, 1e6f64);
    if !holds(hi) {
        return f64::INFINITY;
    }
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if holds(mid) { hi = mid } else { lo = mid }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{height_profile, length_scale, BoundaryFunctionPair, Curve};
    use crate::grid::{build_grid, GridOptions};
    use crate::ode::{potential_from_height, solve_ground_state_1d};
    use crate::pde::{solve_ground_state_2d, EigenOptions};

    fn rectangle(w: f64) -> ConvexDomain {
        ConvexDomain::from_normalized(
            BoundaryFunctionPair::new(0.0, w, Curve::Const { value: 0.0 }, Curve::Const { value: 1.0 })
                .unwrap(),
        )
    }

    fn ellipse(a: f64) -> ConvexDomain {
        ConvexDomain::from_normalized(
            BoundaryFunctionPair::new(
                -a,
                a,
                Curve::EllipseArc { cx: 0.0, half_len: a, cy: 0.5, half_height: 0.5, upper: false },
                Curve::EllipseArc { cx: 0.0, half_len: a, cy: 0.5, half_height: 0.5, upper: true },
            )
            .unwrap(),
        )
    }

    #[test]
    fn transverse_mode_values() {
        let r = rectangle(4.0);
        assert!((transverse_mode(&r, 1.3, 0.5).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((transverse_mode(&r, 1.3, 0.25).unwrap() - 1.0).abs() < 1e-15);
        assert!((transverse_mode(&ellipse(8.0), 0.0, 0.5).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(transverse_mode(&r, 1.0, 1.5), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn quadrature_is_exact_for_sine_columns() {
        // u = sin(pi y) on the unit column: psi = 1/sqrt(2)
        let d = 1.0 / 64.0;
        for gap in [1.0f64, 0.3] {
            let y0 = gap * d;
            let n = ((1.0 - y0) / d).floor() as usize + 1;
            let ys: Vec<f64> = (0..n).map(|k| y0 + k as f64 * d).filter(|&y| y < 1.0).collect();
            let g: Vec<f64> =
                ys.iter().map(|y| 2f64.sqrt() * (PI * y).sin() * (PI * y).sin()).collect();
            let hi = 1.0 - ys[ys.len() - 1];
            let s = column_integral(d, &g, y0, hi);
            assert!((s - 2f64.sqrt() / 2.0).abs() < 1e-6, "{s}");
        }
    }

    #[test]
    fn rectangle_is_a_pure_first_mode() {
        let g = build_grid(&rectangle(4.0), 1.0 / 64.0, GridOptions::default()).unwrap();
        let ep = solve_ground_state_2d(&g, &EigenOptions::default()).unwrap();
        let m = decompose(&g, &ep.u).unwrap();
        // max-normalized u = sin(pi x / 4) sin(pi y) exactly on the lattice
        for (x, psi) in m.first.xs.iter().zip(&m.first.psi) {
            let err = (psi - (PI * x / 4.0).sin() / 2f64.sqrt()).abs();
            assert!(err < 1e-6, "{err}");
        }
        let j = (0.0, 4.0);
        let norms = mode_remainder_norms(&g, &m.u2, j);
        assert!(norms.sup_u2 <= 1e-6, "{}", norms.sup_u2);
        assert!(norms.max_patch() <= 1e-6);
        assert!((m.x_bar - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bump_shows_up_in_u2() {
        let g = build_grid(&rectangle(4.0), 1.0 / 32.0, GridOptions::default()).unwrap();
        let ep = solve_ground_state_2d(&g, &EigenOptions::default()).unwrap();
        let m = decompose(&g, &ep.u).unwrap();
        // second transverse mode is orthogonal to e, so it lands in u2 whole
        let bumped: Vec<f64> = (0..g.len())
            .map(|n| {
                let (x, y) = g.xy(n);
                m.u1[n] + 1e-3 * (PI * x / 4.0).sin() * (2.0 * PI * y).sin() / (2.0 * PI * 0.25).sin().max(1.0)
            })
            .collect();
        let m2 = decompose(&g, &bumped).unwrap();
        let norms = mode_remainder_norms(&g, &m2.u2, (0.0, 4.0));
        assert!((norms.sup_u2 - 1e-3).abs() < 1e-5, "{}", norms.sup_u2);
    }

    #[test]
    fn sigma_of_the_1d_eigenfunction_vanishes() {
        let d = ellipse(8.0);
        let hp = height_profile(&d, 8193).unwrap();
        let op = potential_from_height(&hp, 16.0 / 4096.0).unwrap();
        let ep = solve_ground_state_1d(&op, 1e-8).unwrap();
        let mut xs = vec![op.xs[0] - op.delta];
        xs.extend(&op.xs);
        xs.push(op.xs[op.len() - 1] + op.delta);
        let mut phi = vec![0.0];
        phi.extend(&ep.phi);
        phi.push(0.0);
        let s = residual_sigma(&xs, &phi, &op, ep.mu, (-2.0, 2.0));
        let max = s.sigma.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max < 1e-6, "{max}");
        assert_eq!(s.unit_integrals.len(), 4);
    }

    #[test]
    fn projection_is_contractive_per_column() {
        let g = build_grid(&ellipse(4.0), 1.0 / 32.0, GridOptions::default()).unwrap();
        let ep = solve_ground_state_2d(&g, &EigenOptions::default()).unwrap();
        let m = decompose(&g, &ep.u).unwrap();
        for &i in &m.first.columns {
            let col = g.column(i);
            if col.len() < 2 {
                continue;
            }
            let (lo, hi) = (g.arms[col.start][SOUTH] * g.delta, g.arms[col.end - 1][NORTH] * g.delta);
            let sq = |f: &[f64]| {
                let v: Vec<f64> = col.clone().map(|n| f[n] * f[n]).collect();
                column_integral(g.delta, &v, lo, hi).sqrt()
            };
            let (a, b) = (sq(&ep.u), sq(&m.u1));
            assert!(a >= b - 1e-5, "{a} {b}");
        }
        let ls = length_scale(&height_profile(&g.domain, 8193).unwrap()).unwrap();
        let c = psi_growth_constant(&m.first, m.x_bar, &ls);
        assert!(c.is_finite());
    }
}
