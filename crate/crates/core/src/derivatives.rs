//! Finite-difference derivative fields of `u` and `log u` on masks inside a
//! superlevel set, the quadratic Taylor model at the maximum and its cubic
//! remainder statistic.

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::pde::MaxLocation;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeKind {
    Ux,
    Uy,
    Uxx,
    Uxy,
    Uyy,
    LogUxy,
    GradLogUxy,
    Uxxx,
    Uxyy,
    Uxxy,
    Uyyy,
}

impl DerivativeKind {
    pub const ALL: [DerivativeKind; 11] = [
        Self::Ux,
        Self::Uy,
        Self::Uxx,
        Self::Uxy,
        Self::Uyy,
        Self::LogUxy,
        Self::GradLogUxy,
        Self::Uxxx,
        Self::Uxyy,
        Self::Uxxy,
        Self::Uyyy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ux => "ux",
            Self::Uy => "uy",
            Self::Uxx => "uxx",
            Self::Uxy => "uxy",
            Self::Uyy => "uyy",
            Self::LogUxy => "log_uxy",
            Self::GradLogUxy => "grad_log_uxy",
            Self::Uxxx => "uxxx",
            Self::Uxyy => "uxyy",
            Self::Uxxy => "uxxy",
            Self::Uyyy => "uyyy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Spacing multiplier for third-derivative stencils.
pub const THIRD_ORDER_SPREAD: isize = 2;

struct Stencil {
    points: Vec<(isize, isize, f64)>,
    scale: f64,
}

fn stencil(kind: DerivativeKind, delta: f64) -> Stencil {
    use DerivativeKind::*;
    let k = THIRD_ORDER_SPREAD;
    let h = k as f64 * delta;
    let d2 = delta * delta;
    let (points, scale) = match kind {
        Ux => (vec![(1, 0, 1.0), (-1, 0, -1.0)], 1.0 / (2.0 * delta)),
        Uy => (vec![(0, 1, 1.0), (0, -1, -1.0)], 1.0 / (2.0 * delta)),
        Uxx => (vec![(1, 0, 1.0), (0, 0, -2.0), (-1, 0, 1.0)], 1.0 / d2),
        Uyy => (vec![(0, 1, 1.0), (0, 0, -2.0), (0, -1, 1.0)], 1.0 / d2),
        Uxy => (
            vec![(1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)],
            1.0 / (4.0 * d2),
        ),
        Uxxx => (
            vec![(2 * k, 0, 1.0), (k, 0, -2.0), (-k, 0, 2.0), (-2 * k, 0, -1.0)],
            1.0 / (2.0 * h * h * h),
        ),
        Uyyy => (
            vec![(0, 2 * k, 1.0), (0, k, -2.0), (0, -k, 2.0), (0, -2 * k, -1.0)],
            1.0 / (2.0 * h * h * h),
        ),
        Uxxy => (
            vec![(k, k, 1.0), (0, k, -2.0), (-k, k, 1.0), (k, -k, -1.0), (0, -k, 2.0), (-k, -k, -1.0)],
            1.0 / (2.0 * h * h * h),
        ),
        Uxyy => (
            vec![(k, k, 1.0), (k, 0, -2.0), (k, -k, 1.0), (-k, k, -1.0), (-k, 0, 2.0), (-k, -k, -1.0)],
            1.0 / (2.0 * h * h * h),
        ),
        LogUxy | GradLogUxy => unreachable!("composite fields have no direct stencil"),
    };
    Stencil { points, scale }
}

/// A derivative field on the nodes whose whole stencil lies in `{u >= level}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeField {
    pub kind: DerivativeKind,
    pub level: f64,
    /// One entry per grid node; `NaN` off the mask.
    pub values: Vec<f64>,
}

impl DerivativeField {
    pub fn mask(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(n, _)| n)
    }

    pub fn mask_len(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().filter(|v| v.is_finite()).map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn get(&self, node: usize) -> Option<f64> {
        let v = self.values[node];
        v.is_finite().then_some(v)
    }
}

fn apply(g: &Grid2D, values: &[f64], u: &[f64], level: f64, st: &Stencil) -> Vec<f64> {
    (0..g.len())
        .map(|n| {
            if u[n] < level {
                return f64::NAN;
            }
            let (i, j) = g.ij[n];
            let mut s = 0.0;
            for &(di, dj, w) in &st.points {
                match g.node_at(i as isize + di, j as isize + dj) {
                    Some(m) if u[m] >= level => s += w * values[m],
                    _ => return f64::NAN,
                }
            }
            s * st.scale
        })
        .collect()
}

/// Applies the stencil of `kind` to an arbitrary nodal field (for instance
/// `log u`), masked by the superlevel set of `u`.
pub fn derivative_field_of(
    g: &Grid2D,
    values: &[f64],
    u: &[f64],
    kind: DerivativeKind,
    level: f64,
) -> Result<DerivativeField> {
    let values = match kind {
        DerivativeKind::LogUxy => return log_mixed_derivative(g, u, level),
        DerivativeKind::GradLogUxy => return grad_log_mixed(g, u, level),
        _ => apply(g, values, u, level, &stencil(kind, g.delta)),
    };
    nonempty(DerivativeField { kind, level, values })
}

pub fn derivative_field(g: &Grid2D, u: &[f64], kind: DerivativeKind, level: f64) -> Result<DerivativeField> {
    derivative_field_of(g, u, u, kind, level)
}

fn nonempty(f: DerivativeField) -> Result<DerivativeField> {
    if f.mask_len() == 0 {
        Err(Error::EmptyMask(format!("{} on level {}", f.kind.name(), f.level)))
    } else {
        Ok(f)
    }
}

/// `d_x d_y log u = (u uxy - ux uy) / u^2` from the FD fields.
pub fn log_mixed_derivative(g: &Grid2D, u: &[f64], level: f64) -> Result<DerivativeField> {
    let ux = apply(g, u, u, level, &stencil(DerivativeKind::Ux, g.delta));
    let uy = apply(g, u, u, level, &stencil(DerivativeKind::Uy, g.delta));
    let uxy = apply(g, u, u, level, &stencil(DerivativeKind::Uxy, g.delta));
    let values = (0..g.len())
        .map(|n| (u[n] * uxy[n] - ux[n] * uy[n]) / (u[n] * u[n]))
        .collect();
    nonempty(DerivativeField { kind: DerivativeKind::LogUxy, level, values })
}

/// `|grad d_x d_y log u|` by central differences of the log-mixed field.
pub fn grad_log_mixed(g: &Grid2D, u: &[f64], level: f64) -> Result<DerivativeField> {
    let f = log_mixed_derivative(g, u, level)?;
    let values = central_gradient_norm(g, &f.values);
    nonempty(DerivativeField { kind: DerivativeKind::GradLogUxy, level, values })
}

fn central_gradient_norm(g: &Grid2D, f: &[f64]) -> Vec<f64> {
    (0..g.len())
        .map(|n| {
            if !f[n].is_finite() {
                return f64::NAN;
            }
            let (i, j) = (g.ij[n].0 as isize, g.ij[n].1 as isize);
            let at = |di: isize, dj: isize| g.node_at(i + di, j + dj).map_or(f64::NAN, |m| f[m]);
            let gx = (at(1, 0) - at(-1, 0)) / (2.0 * g.delta);
            let gy = (at(0, 1) - at(0, -1)) / (2.0 * g.delta);
            (gx * gx + gy * gy).sqrt()
        })
        .collect()
}

/// `uxy` as a composition of two central first differences, in either
/// order. Both reduce to the four-point cross stencil.
pub fn mixed_by_composition(g: &Grid2D, u: &[f64], level: f64, x_first: bool) -> Vec<f64> {
    let (first, second) = if x_first {
        (DerivativeKind::Ux, DerivativeKind::Uy)
    } else {
        (DerivativeKind::Uy, DerivativeKind::Ux)
    };
    let inner = apply(g, u, u, level, &stencil(first, g.delta));
    let st = stencil(second, g.delta);
    (0..g.len())
        .map(|n| {
            if u[n] < level {
                return f64::NAN;
            }
            let (i, j) = g.ij[n];
            let mut s = 0.0;
            for &(di, dj, w) in &st.points {
                match g.node_at(i as isize + di, j as isize + dj) {
                    Some(m) => s += w * inner[m],
                    None => return f64::NAN,
                }
            }
            s * st.scale
        })
        .collect()
}

/// `a^2 uxx + 2ab uxy + b^2 uyy` for the unit direction `(a, b)`.
pub fn directional_second(g: &Grid2D, u: &[f64], dir: (f64, f64), level: f64) -> Result<DerivativeField> {
    let (a, b) = dir;
    let uxx = apply(g, u, u, level, &stencil(DerivativeKind::Uxx, g.delta));
    let uxy = apply(g, u, u, level, &stencil(DerivativeKind::Uxy, g.delta));
    let uyy = apply(g, u, u, level, &stencil(DerivativeKind::Uyy, g.delta));
    let values = (0..g.len())
        .map(|n| a * a * uxx[n] + 2.0 * a * b * uxy[n] + b * b * uyy[n])
        .collect();
    nonempty(DerivativeField { kind: DerivativeKind::Uxx, level, values })
}

/// The band `L^-2 max(1, |b| L)^2` for the direction `(a, b)`.
pub fn alpha_nu(b: f64, l: f64) -> f64 {
    let m = (b.abs() * l).max(1.0);
    m * m / (l * l)
}

/// Unit directions at angles `k pi / count`, `k = 0..count`.
pub fn directions(count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / count as f64;
            (t.cos(), t.sin())
        })
        .collect()
}

/// Largest eigenvalue of the FD Hessian on `{u >= level}`, with its node.
pub fn max_hessian_eigenvalue(g: &Grid2D, u: &[f64], level: f64) -> Result<(f64, usize, usize)> {
    let uxx = apply(g, u, u, level, &stencil(DerivativeKind::Uxx, g.delta));
    let uxy = apply(g, u, u, level, &stencil(DerivativeKind::Uxy, g.delta));
    let uyy = apply(g, u, u, level, &stencil(DerivativeKind::Uyy, g.delta));
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    let mut count = 0;
    for n in 0..g.len() {
        if !(uxx[n].is_finite() && uxy[n].is_finite() && uyy[n].is_finite()) {
            continue;
        }
        count += 1;
        let m = 0.5 * (uxx[n] + uyy[n]);
        let r = (0.25 * (uxx[n] - uyy[n]).powi(2) + uxy[n] * uxy[n]).sqrt();
        if m + r > best.0 {
            best = (m + r, n);
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask(format!("Hessian on level {level}")));
    }
    Ok((best.0, best.1, count))
}

/// Sup of the central-difference gradient norm on `{u >= level}`, and for
/// each direction the sup of `|a ux + b uy|`.
pub fn gradient_sups(g: &Grid2D, u: &[f64], level: f64, dirs: &[(f64, f64)]) -> Result<(f64, Vec<f64>)> {
    let ux = apply(g, u, u, level, &stencil(DerivativeKind::Ux, g.delta));
    let uy = apply(g, u, u, level, &stencil(DerivativeKind::Uy, g.delta));
    let mut sup = 0.0f64;
    let mut dir_sup = vec![0.0f64; dirs.len()];
    let mut count = 0;
    for n in 0..g.len() {
        if !(ux[n].is_finite() && uy[n].is_finite()) {
            continue;
        }
        count += 1;
        sup = sup.max(ux[n].hypot(uy[n]));
        for (k, (a, b)) in dirs.iter().enumerate() {
            dir_sup[k] = dir_sup[k].max((a * ux[n] + b * uy[n]).abs());
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask(format!("gradient on level {level}")));
    }
    Ok((sup, dir_sup))
}

/// Quadratic Taylor model of `u` at its maximum.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TaylorModel {
    pub x_star: f64,
    pub y_star: f64,
    /// `u(x*, y*)` from the local fit (1 up to discretization error).
    pub value: f64,
    pub uxx: f64,
    pub uxy: f64,
    pub uyy: f64,
}

impl TaylorModel {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.x_star, y - self.y_star);
        self.value + 0.5 * (self.uxx * dx * dx + 2.0 * self.uxy * dx * dy + self.uyy * dy * dy)
    }
}

/// FD Hessian bilinearly interpolated at the refined maximum (or taken at
/// the max node when the surrounding cell is not fully masked).
pub fn taylor_model(g: &Grid2D, u: &[f64], loc: &MaxLocation) -> Result<TaylorModel> {
    let fields: Vec<Vec<f64>> = [DerivativeKind::Uxx, DerivativeKind::Uxy, DerivativeKind::Uyy]
        .iter()
        .map(|&k| apply(g, u, u, 0.0, &stencil(k, g.delta)))
        .collect();
    let s = (loc.x_star - g.x_of(0)) / g.delta;
    let t = (loc.y_star - g.y_of(0)) / g.delta;
    let (i0, j0) = (s.floor() as isize, t.floor() as isize);
    let (fs, ft) = (s - i0 as f64, t - j0 as f64);
    let corners = [(0, 0), (1, 0), (0, 1), (1, 1)];
    let nodes: Option<Vec<usize>> = corners.iter().map(|&(di, dj)| g.node_at(i0 + di, j0 + dj)).collect();
    let interp = |f: &[f64]| -> f64 {
        if let Some(ns) = &nodes {
            let v: Vec<f64> = ns.iter().map(|&n| f[n]).collect();
            if v.iter().all(|x| x.is_finite()) {
                return (1.0 - fs) * (1.0 - ft) * v[0] + fs * (1.0 - ft) * v[1] + (1.0 - fs) * ft * v[2] + fs * ft * v[3];
            }
        }
        f[loc.node]
    };
    let (uxx, uxy, uyy) = (interp(&fields[0]), interp(&fields[1]), interp(&fields[2]));
    if !(uxx < 0.0 && uyy < 0.0) {
        return Err(Error::DegenerateHessian { uxx, uyy });
    }
    Ok(TaylorModel { x_star: loc.x_star, y_star: loc.y_star, value: loc.value, uxx, uxy, uyy })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RemainderStats {
    pub sup_ratio: f64,
    pub at: (f64, f64),
    pub count: usize,
}

/// `sup |u - P2*| / max(L^-3 |x - x*|^3, |y - y*|^3)` over `{u >= 1/2}`
/// minus the square of half-width `2 delta` around the maximum.
pub fn remainder_ratio(g: &Grid2D, u: &[f64], tm: &TaylorModel, l: f64) -> Result<RemainderStats> {
    let excl = 2.0 * g.delta;
    let mut best = RemainderStats { sup_ratio: 0.0, at: (f64::NAN, f64::NAN), count: 0 };
    for n in 0..g.len() {
        if u[n] < 0.5 {
            continue;
        }
        let (x, y) = g.xy(n);
        let (dx, dy) = ((x - tm.x_star).abs(), (y - tm.y_star).abs());
        if dx < excl && dy < excl {
            continue;
        }
        best.count += 1;
        let den = (dx * dx * dx / (l * l * l)).max(dy * dy * dy);
        let r = (u[n] - tm.eval(x, y)).abs() / den;
        if r > best.sup_ratio {
            best.sup_ratio = r;
            best.at = (x, y);
        }
    }
    if best.count == 0 {
        return Err(Error::EmptyMask("remainder ratio on level 1/2".into()));
    }
    Ok(best)
}

/// Compares `d_x^3 log u` by direct differencing of `log u` with its
/// reconstruction from `Delta log u = -lambda - |grad log u|^2`:
/// `d_x^3 log u = -d_x d_y^2 log u - 2 (lx lxx + ly lxy)`.
/// Returns `max |direct - reconstructed| / max |direct|` over the mask.
pub fn third_derivative_identity_defect(g: &Grid2D, u: &[f64], level: f64) -> Result<f64> {
    let lu: Vec<f64> = u.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let f = |k| derivative_field_of(g, &lu, u, k, level);
    let (lxxx, lxyy) = (f(DerivativeKind::Uxxx)?, f(DerivativeKind::Uxyy)?);
    let (lx, ly) = (f(DerivativeKind::Ux)?, f(DerivativeKind::Uy)?);
    let (lxx, lxy) = (f(DerivativeKind::Uxx)?, f(DerivativeKind::Uxy)?);
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for n in lxxx.mask() {
        let recon = -lxyy.values[n] - 2.0 * (lx.values[n] * lxx.values[n] + ly.values[n] * lxy.values[n]);
        if !recon.is_finite() {
            continue;
        }
        err = err.max((lxxx.values[n] - recon).abs());
        scale = scale.max(lxxx.values[n].abs());
    }
    Ok(if scale > 0.0 { err / scale } else { err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundaryFunctionPair, ConvexDomain, Curve};
    use crate::grid::{build_grid, GridOptions};
    use crate::pde::{locate_max, solve_ground_state_2d, EigenOptions};
    use std::f64::consts::PI;

    fn rectangle(w: f64, h: f64) -> ConvexDomain {
        ConvexDomain::from_normalized(
            BoundaryFunctionPair::new(0.0, w, Curve::Const { value: 0.0 }, Curve::Const { value: h })
                .unwrap(),
        )
    }

    fn synthetic(g: &Grid2D, l: f64, xs: f64, ys: f64) -> Vec<f64> {
        (0..g.len())
            .map(|n| {
                let (x, y) = g.xy(n);
                1.0 - (x - xs).powi(2) / (2.0 * l * l) - (y - ys).powi(2) / 2.0
            })
            .collect()
    }

    #[test]
    fn quadratic_field_derivatives_are_exact() {
        let g = build_grid(&rectangle(12.0, 3.0), 1.0 / 32.0, GridOptions::default()).unwrap();
        let u = synthetic(&g, 4.0, 6.0, 1.5);
        let uxx = derivative_field(&g, &u, DerivativeKind::Uxx, 0.8).unwrap();
        let uyy = derivative_field(&g, &u, DerivativeKind::Uyy, 0.8).unwrap();
        let uxy = derivative_field(&g, &u, DerivativeKind::Uxy, 0.8).unwrap();
        for n in uxx.mask() {
            assert!((uxx.values[n] + 1.0 / 16.0).abs() < 1e-10);
        }
        for n in uyy.mask() {
            assert!((uyy.values[n] + 1.0).abs() < 1e-10);
        }
        assert!(uxy.sup_abs() < 1e-10);
        let dx = directional_second(&g, &u, (1.0, 0.0), 0.8).unwrap();
        let dy = directional_second(&g, &u, (0.0, 1.0), 0.8).unwrap();
        for n in dx.mask() {
            assert!((-dx.values[n] / alpha_nu(0.0, 4.0) - 1.0).abs() < 1e-9);
            assert!((-dy.values[n] / alpha_nu(1.0, 4.0) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn stencil_closure_holds_on_masks() {
        let g = build_grid(&rectangle(4.0, 1.0), 1.0 / 32.0, GridOptions::default()).unwrap();
        let ep = solve_ground_state_2d(&g, &EigenOptions::default()).unwrap();
        for kind in [DerivativeKind::Uxxx, DerivativeKind::Uxy, DerivativeKind::Uyyy] {
            let f = derivative_field(&g, &ep.u, kind, 0.5).unwrap();
            for n in f.mask() {
                assert!(ep.u[n] >= 0.5);
                let (i, j) = g.ij[n];
                for (di, dj, _) in stencil(kind, g.delta).points {
                    let m = g.node_at(i as isize + di, j as isize + dj).unwrap();
                    assert!(ep.u[m] >= 0.5);
                }
            }
        }
        assert!(matches!(
            derivative_field(&g, &ep.u, DerivativeKind::Uxx, 1.5),
            Err(Error::EmptyMask(_))
        ));
    }

    #[test]
    fn second_difference_converges_at_second_order() {
        let err = |d: f64| {
            let g = build_grid(&rectangle(2.0, 1.0), d, GridOptions::default()).unwrap();
            let u: Vec<f64> = (0..g.len()).map(|n| (PI * g.xy(n).0).sin()).collect();
            let uxx = derivative_field_of(&g, &u, &vec![1.0; g.len()], DerivativeKind::Uxx, 0.0).unwrap();
            uxx.mask()
                .map(|n| (uxx.values[n] + PI * PI * (PI * g.xy(n).0).sin()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(1.0 / 32.0) / err(1.0 / 64.0);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn rectangle_log_mixed_vanishes_and_hessian_orders_agree() {
        let g = build_grid(&rectangle(4.0, 1.0), 1.0 / 32.0, GridOptions::default()).unwrap();
        let ep = solve_ground_state_2d(&g, &EigenOptions::default()).unwrap();
        assert!(log_mixed_derivative(&g, &ep.u, 0.9).unwrap().sup_abs() < 5e-4);
        let a = mixed_by_composition(&g, &ep.u, 0.5, true);
        let b = mixed_by_composition(&g, &ep.u, 0.5, false);
        let c = derivative_field(&g, &ep.u, DerivativeKind::Uxy, 0.5).unwrap();
        for n in c.mask() {
            assert!((a[n] - b[n]).abs() < 1e-10 && (a[n] - c.values[n]).abs() < 1e-10);
        }
        // eigenfunction equation on the mask
        let uxx = derivative_field(&g, &ep.u, DerivativeKind::Uxx, 0.2).unwrap();
        let uyy = derivative_field(&g, &ep.u, DerivativeKind::Uyy, 0.2).unwrap();
        for n in uxx.mask() {
            let Some(yy) = uyy.get(n) else { continue };
            let r = (uxx.values[n] + yy + ep.lambda * ep.u[n]).abs();
            assert!(r < 1e-6, "residual {r} res {}", ep.residual);
        }
    }

    #[test]
    fn taylor_model_reproduces_a_quadratic() {
        let g = build_grid(&rectangle(12.0, 3.0), 1.0 / 64.0, GridOptions::default()).unwrap();
        let u = synthetic(&g, 4.0, 6.0, 1.5);
        let loc = locate_max(&g, &u);
        assert!(!loc.fallback);
        let tm = taylor_model(&g, &u, &loc).unwrap();
        assert!((tm.uxx + 1.0 / 16.0).abs() < 1e-9 && (tm.uyy + 1.0).abs() < 1e-9);
        let r = remainder_ratio(&g, &u, &tm, 4.0).unwrap();
        assert!(r.sup_ratio <= 1e-8, "{}", r.sup_ratio);
    }

    #[test]
    fn degenerate_hessian_is_reported() {
        let g = build_grid(&rectangle(4.0, 1.0), 1.0 / 32.0, GridOptions::default()).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|n| 1.0 + 0.01 * g.xy(n).0.powi(2)).collect();
        let loc = locate_max(&g, &u);
        assert!(matches!(taylor_model(&g, &u, &loc), Err(Error::DegenerateHessian { .. })));
    }
}
