//! Shortley–Weller discretization of the Dirichlet Laplacian and its ground
//! state by shifted inverse iteration with a direct envelope factorization.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, EAST, NONE, NORTH, SOUTH, WEST};
use crate::lu::{EnvelopeLu, RowAccess};
use nalgebra::{DMatrix, DVector, Matrix2, Schur, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `-Laplacian` on the interior nodes; boundary values are zero.
#[derive(Clone, Debug)]
pub struct SwOperator {
    pub diag: Vec<f64>,
    /// Off-diagonal weights (positive), subtracted in [`SwOperator::apply`].
    pub coef: Vec<[f64; 4]>,
    pub nbrs: Vec<[u32; 4]>,
}

impl SwOperator {
    pub fn new(g: &Grid2D) -> Self {
        let d2 = g.delta * g.delta;
        let mut diag = Vec::with_capacity(g.len());
        let mut coef = Vec::with_capacity(g.len());
        for th in &g.arms {
            let (e, w, n, s) = (th[EAST], th[WEST], th[NORTH], th[SOUTH]);
            coef.push([
                2.0 / (e * (e + w) * d2),
                2.0 / (w * (e + w) * d2),
                2.0 / (n * (n + s) * d2),
                2.0 / (s * (n + s) * d2),
            ]);
            diag.push(2.0 / (e * w * d2) + 2.0 / (n * s * d2));
        }
        Self { diag, coef, nbrs: g.nbrs.clone() }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for k in 0..self.len() {
            let mut s = self.diag[k] * u[k];
            for dir in 0..4 {
                let nb = self.nbrs[k][dir];
                if nb != NONE {
                    s -= self.coef[k][dir] * u[nb as usize];
                }
            }
            out[k] = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = self.diag[k];
            for dir in 0..4 {
                let nb = self.nbrs[k][dir];
                if nb != NONE {
                    m[(k, nb as usize)] = -self.coef[k][dir];
                }
            }
        }
        m
    }
}

impl RowAccess for SwOperator {
    fn dim(&self) -> usize {
        self.len()
    }

    fn row(&self, r: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.push((r, self.diag[r]));
        for dir in 0..4 {
            let nb = self.nbrs[r][dir];
            if nb != NONE {
                out.push((nb as usize, -self.coef[r][dir]));
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    /// Relative tolerance on Rayleigh-quotient change and on the residual.
    pub rtol: f64,
    pub max_iter: usize,
    /// Shift as a fraction of `pi^2 / H^2`, `H` the bounding-box height.
    pub shift_factor: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, max_iter: 1000, shift_factor: 0.99 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenPair2D {
    pub lambda: f64,
    pub delta: f64,
    /// Positive, scaled so that the largest nodal value is 1.
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Lowest Dirichlet eigenpair of the Shortley–Weller operator on `g`.
pub fn solve_ground_state_2d(g: &Grid2D, opts: &EigenOptions) -> Result<EigenPair2D> {
    let op = SwOperator::new(g);
    let n = op.len();
    let height = g.delta * (g.ny - 1) as f64;
    let mut shift = opts.shift_factor * PI * PI / (height * height);
    let lu = loop {
        match EnvelopeLu::factor(&op, shift) {
            Ok(lu) => break lu,
            Err(_) if shift > 1e-3 => shift *= 0.5,
            Err(e) => return Err(e),
        }
    };
    let mut u = vec![1.0; n];
    let mut au = vec![0.0; n];
    let mut rho_prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        lu.solve_in_place(&mut u);
        let sup = u.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let sign = if u.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        u.iter_mut().for_each(|v| *v *= sign / sup);
        op.apply(&u, &mut au);
        let num: f64 = au.iter().zip(&u).map(|(a, b)| a * b).sum();
        let den: f64 = u.iter().map(|v| v * v).sum();
        let rho = num / den;
        residual = au.iter().zip(&u).map(|(a, b)| (a - rho * b).abs()).fold(0.0, f64::max);
        if (rho - rho_prev).abs() < opts.rtol * rho && residual <= opts.rtol * rho {
            let min = u.iter().copied().fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                return Err(Error::NonPositiveGroundState { min });
            }
            let k = (0..n).max_by(|&i, &j| u[i].total_cmp(&u[j])).unwrap();
            let top = u[k];
            u.iter_mut().for_each(|v| *v /= top);
            return Ok(EigenPair2D { lambda: rho, delta: g.delta, u, iterations: it, residual });
        }
        rho_prev = rho;
    }
    Err(Error::ConvergenceFailure { what: "2-D inverse iteration", iterations: opts.max_iter, residual })
}

/// `(4 fine - coarse) / 3` for a second-order quantity under halving.
pub fn richardson_extrapolate(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Dense reference solution for small grids: eigenvalues from a real Schur
/// decomposition (a symmetric eigensolver when the matrix is symmetric),
/// eigenvector from dense inverse iteration.
pub fn dense_oracle_ground_state(g: &Grid2D) -> Result<EigenPair2D> {
    const MAX_NODES: usize = 2500;
    if g.len() > MAX_NODES {
        return Err(Error::TooLarge { nodes: g.len(), max: MAX_NODES });
    }
    let a = SwOperator::new(g).to_dense();
    let n = a.nrows();
    // Interior-only grids give a symmetric matrix, often with a degenerate
    // spectrum on which the unsymmetric QR sweep can stall.
    let asym = (&a - a.transpose()).amax();
    let lambda = if asym <= 1e-14 * a.amax() {
        a.clone().symmetric_eigenvalues().min()
    } else {
        let schur = Schur::try_new(a.clone(), f64::EPSILON, 1000 * n).ok_or(Error::ConvergenceFailure {
            what: "dense Schur decomposition",
            iterations: 1000 * n,
            residual: f64::NAN,
        })?;
        schur
            .complex_eigenvalues()
            .iter()
            .filter(|z| z.im.abs() <= 1e-8 * z.re.abs())
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    };
    let shifted = &a - DMatrix::identity(n, n) * (lambda * (1.0 - 1e-9));
    let lu = shifted.lu();
    let mut v = DVector::from_element(n, 1.0);
    for _ in 0..3 {
        v = lu.solve(&v).ok_or(Error::ConvergenceFailure {
            what: "dense inverse iteration",
            iterations: 0,
            residual: f64::NAN,
        })?;
        let s = v.amax();
        v /= s;
    }
    if v.sum() < 0.0 {
        v = -v;
    }
    let k = v.iamax();
    let top = v[k];
    let u: Vec<f64> = v.iter().map(|x| x / top).collect();
    let residual = (&a * DVector::from_column_slice(&u) - DVector::from_column_slice(&u) * lambda).amax();
    Ok(EigenPair2D { lambda, delta: g.delta, u, iterations: 3, residual })
}

/// Location of the discrete maximum, refined by a least-squares quadratic.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MaxLocation {
    pub node: usize,
    pub x_star: f64,
    pub y_star: f64,
    pub value: f64,
    /// Hessian of the fitted quadratic `[uxx, uxy, uyy]`.
    pub hessian: [f64; 3],
    /// True when the fit was rejected and the node itself is reported.
    pub fallback: bool,
}

/// Fits `c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2` to the 3x3 patch
/// around the largest nodal value and takes its stationary point. Falls back
/// to the node when the patch is incomplete, the fit is not concave, or the
/// stationary point leaves the patch.
pub fn locate_max(g: &Grid2D, u: &[f64]) -> MaxLocation {
    let node = (0..u.len()).max_by(|&i, &j| u[i].total_cmp(&u[j])).unwrap();
    let (x0, y0) = g.xy(node);
    let (i, j) = g.ij[node];
    let fallback = MaxLocation {
        node,
        x_star: x0,
        y_star: y0,
        value: u[node],
        hessian: [f64::NAN; 3],
        fallback: true,
    };
    let mut rows = Vec::with_capacity(54);
    let mut rhs = Vec::with_capacity(9);
    for di in -1isize..=1 {
        for dj in -1isize..=1 {
            let Some(m) = g.node_at(i as isize + di, j as isize + dj) else {
                return fallback;
            };
            let (s, t) = (di as f64, dj as f64);
            rows.extend_from_slice(&[1.0, s, t, s * s, s * t, t * t]);
            rhs.push(u[m]);
        }
    }
    let m = DMatrix::from_row_slice(9, 6, &rows);
    let b = DVector::from_vec(rhs);
    let Some(c) = (m.transpose() * &m).lu().solve(&(m.transpose() * b)) else {
        return fallback;
    };
    let h = Matrix2::new(2.0 * c[3], c[4], c[4], 2.0 * c[5]);
    let d2 = g.delta * g.delta;
    let hessian = [2.0 * c[3] / d2, c[4] / d2, 2.0 * c[5] / d2];
    if !(h[(0, 0)] < 0.0 && h.determinant() > 0.0) {
        return MaxLocation { hessian, ..fallback };
    }
    let Some(st) = h.lu().solve(&Vector2::new(-c[1], -c[2])) else {
        return MaxLocation { hessian, ..fallback };
    };
    if st[0].abs() > 1.0 || st[1].abs() > 1.0 {
        return MaxLocation { hessian, ..fallback };
    }
    let value = c[0] + c[1] * st[0] + c[2] * st[1] + c[3] * st[0] * st[0] + c[4] * st[0] * st[1] + c[5] * st[1] * st[1];
    MaxLocation {
        node,
        x_star: x0 + st[0] * g.delta,
        y_star: y0 + st[1] * g.delta,
        value,
        hessian,
        fallback: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundaryFunctionPair, ConvexDomain, Curve};
    use crate::grid::{build_grid, GridOptions};

    fn rectangle(w: f64) -> ConvexDomain {
        ConvexDomain::from_normalized(
            BoundaryFunctionPair::new(0.0, w, Curve::Const { value: 0.0 }, Curve::Const { value: 1.0 })
                .unwrap(),
        )
    }

    fn disk() -> ConvexDomain {
        ConvexDomain::from_normalized(
            BoundaryFunctionPair::new(
                0.0,
                1.0,
                Curve::EllipseArc { cx: 0.5, half_len: 0.5, cy: 0.5, half_height: 0.5, upper: false },
                Curve::EllipseArc { cx: 0.5, half_len: 0.5, cy: 0.5, half_height: 0.5, upper: true },
            )
            .unwrap(),
        )
    }

    #[test]
    fn rectangle_matches_discrete_formula() {
        let d = 1.0 / 32.0;
        let g = build_grid(&rectangle(2.0), d, GridOptions::default()).unwrap();
        let ep = solve_ground_state_2d(&g, &EigenOptions::default()).unwrap();
        let exact = 4.0 / (d * d) * ((PI * d / 2.0).sin().powi(2) + (PI * d / 4.0).sin().powi(2));
        assert!((ep.lambda - exact).abs() < 1e-9 * exact, "{} vs {exact}", ep.lambda);
        let loc = locate_max(&g, &ep.u);
        assert!((loc.x_star - 1.0).abs() < 1e-9 && (loc.y_star - 0.5).abs() < 1e-9);
    }

    #[test]
    fn sparse_solver_agrees_with_dense_oracle_on_disk() {
        let g = build_grid(&disk(), 1.0 / 20.0, GridOptions::relaxed()).unwrap();
        let ep = solve_ground_state_2d(&g, &EigenOptions::default()).unwrap();
        let or = dense_oracle_ground_state(&g).unwrap();
        assert!((ep.lambda - or.lambda).abs() < 1e-9 * or.lambda);
        let dot: f64 = ep.u.iter().zip(&or.u).map(|(a, b)| a * b).sum();
        let na: f64 = ep.u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb: f64 = or.u.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(dot / (na * nb) > 1.0 - 1e-8);
    }

    #[test]
    fn dense_oracle_handles_degenerate_symmetric_spectra() {
        // A 4 x 1 rectangle has exactly repeated eigenvalues higher up.
        let g = build_grid(&rectangle(4.0), 1.0 / 16.0, GridOptions::relaxed()).unwrap();
        let or = dense_oracle_ground_state(&g).unwrap();
        let exact = (4.0 / (g.delta * g.delta)) * ((PI * g.delta / 8.0).sin().powi(2) + (PI * g.delta / 2.0).sin().powi(2));
        assert!((or.lambda - exact).abs() < 1e-9 * exact, "{} vs {exact}", or.lambda);
    }

    #[test]
    fn dense_oracle_refuses_large_grids() {
        let g = build_grid(&rectangle(4.0), 1.0 / 32.0, GridOptions::default()).unwrap();
        assert!(matches!(dense_oracle_ground_state(&g), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn richardson_removes_quadratic_error() {
        let f = |d: f64| 3.0 + 5.0 * d * d;
        assert!((richardson_extrapolate(f(0.1), f(0.05)) - 3.0).abs() < 1e-14);
    }
}
