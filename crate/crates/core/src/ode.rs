//! The one-dimensional comparison operator `-d^2/dx^2 + pi^2 / h(x)^2` with
//! Dirichlet ends, discretized by the three-point scheme and solved by Sturm
//! bisection followed by inverse iteration.

use crate::domain::HeightProfile;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Heights below this are treated as the boundary (the potential blows up).
pub const H_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct OdeOperator {
    /// Actual spacing; `(b - a) / n` for the smallest `n` with spacing at most
    /// the requested one.
    pub delta: f64,
    /// Interior nodes where `h > H_FLOOR`; the neighbours outside carry the
    /// Dirichlet condition.
    pub xs: Vec<f64>,
    pub h: Vec<f64>,
    pub v: Vec<f64>,
    profile: HeightProfile,
}

impl OdeOperator {
    /// `pi^2 / h(x)^2` evaluated through the height profile.
    pub fn potential_at(&self, x: f64) -> f64 {
        let h = self.profile.h_at(x);
        if h <= H_FLOOR { f64::INFINITY } else { PI * PI / (h * h) }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn diag(&self, k: usize) -> f64 {
        2.0 / (self.delta * self.delta) + self.v[k]
    }

    fn off(&self) -> f64 {
        -1.0 / (self.delta * self.delta)
    }

    /// Applies the discrete operator.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let m = self.len();
        let off = self.off();
        (0..m)
            .map(|k| {
                let mut s = self.diag(k) * u[k];
                if k > 0 {
                    s += off * u[k - 1];
                }
                if k + 1 < m {
                    s += off * u[k + 1];
                }
                s
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `sigma` (Sturm sequence).
    pub fn count_below(&self, sigma: f64) -> usize {
        let off2 = self.off() * self.off();
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut d = 1.0;
        for k in 0..self.len() {
            d = self.diag(k) - sigma - if k == 0 { 0.0 } else { off2 / d };
            if d == 0.0 {
                d = -tiny;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    // Solves (T - s) x = rhs by the Thomas algorithm.
    fn shifted_solve(&self, s: f64, rhs: &[f64]) -> Vec<f64> {
        let m = self.len();
        let off = self.off();
        let mut c = vec![0.0; m];
        let mut x = vec![0.0; m];
        let mut piv = self.diag(0) - s;
        c[0] = off / piv;
        x[0] = rhs[0] / piv;
        for k in 1..m {
            piv = self.diag(k) - s - off * c[k - 1];
            c[k] = off / piv;
            x[k] = (rhs[k] - off * x[k - 1]) / piv;
        }
        for k in (0..m - 1).rev() {
            x[k] -= c[k] * x[k + 1];
        }
        x
    }
}

/// Discretizes the operator on a uniform grid of spacing at most `delta`.
pub fn potential_from_height(hp: &HeightProfile, delta: f64) -> Result<OdeOperator> {
    let (a, b) = (hp.a(), hp.b());
    if !(delta > 0.0) || delta > (b - a) / 64.0 {
        return Err(Error::BadParam(format!(
            "1-D spacing {delta} must be positive and at most (b - a) / 64 = {}",
            (b - a) / 64.0
        )));
    }
    let n = ((b - a) / delta - 1e-9).ceil() as usize;
    let delta = (b - a) / n as f64;
    let (mut xs, mut h, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for k in 1..n {
        let x = a + k as f64 * delta;
        let hk = hp.h_at(x);
        if hk > H_FLOOR {
            xs.push(x);
            h.push(hk);
            v.push(PI * PI / (hk * hk));
        }
    }
    if xs.len() < 3 {
        return Err(Error::BadParam("height profile is too thin for the 1-D grid".into()));
    }
    Ok(OdeOperator { delta, xs, h, v, profile: hp.clone() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenPair1D {
    pub mu: f64,
    pub delta: f64,
    pub xs: Vec<f64>,
    /// Positive, scaled so that the largest nodal value is 1.
    pub phi: Vec<f64>,
    /// Location of the maximum, refined by a three-point parabola.
    pub x_max: f64,
    pub residual: f64,
}

/// Lowest eigenpair: Sturm bisection to relative `1e-13`, then two steps of
/// inverse iteration at the lower end of the final bracket.
pub fn solve_ground_state_1d(op: &OdeOperator, rtol: f64) -> Result<EigenPair1D> {
    let m = op.len();
    let d2 = op.delta * op.delta;
    let vmin = op.v.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = op.v.iter().copied().fold(0.0, f64::max);
    let mut lo = vmin - 1.0 / d2;
    let trial: Vec<f64> = (0..m).map(|k| (PI * (k + 1) as f64 / (m + 1) as f64).sin()).collect();
    let mut hi = rayleigh(op, &trial);
    hi += 1e-12 * hi.abs() + 1e-300;
    while op.count_below(hi) == 0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if op.count_below(mid) >= 1 { hi = mid } else { lo = mid }
    }
    let mut phi = vec![1.0; m];
    for _ in 0..2 {
        phi = op.shifted_solve(lo, &phi);
        let norm = phi.iter().map(|v| v.abs()).fold(0.0, f64::max);
        phi.iter_mut().for_each(|v| *v /= norm);
    }
    if phi.iter().sum::<f64>() < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
    let mu = rayleigh(op, &phi).clamp(lo, hi);
    let top = phi.iter().copied().fold(0.0, f64::max);
    phi.iter_mut().for_each(|v| *v /= top);

    let tphi = op.apply(&phi);
    let sup = phi.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let residual = tphi
        .iter()
        .zip(&phi)
        .map(|(t, p)| (t - mu * p).abs())
        .fold(0.0, f64::max)
        / sup;
    // backward error relative to the operator norm, which is what roundoff
    // in the three-point stencil allows
    if residual > rtol * (4.0 / d2 + vmax) {
        return Err(Error::ConvergenceFailure { what: "1-D eigensolver", iterations: 2, residual });
    }
    let k = (0..m).max_by(|&i, &j| phi[i].total_cmp(&phi[j])).unwrap();
    let x_max = if k > 0 && k + 1 < m {
        let (pm, p0, pp) = (phi[k - 1], phi[k], phi[k + 1]);
        let curv = pm - 2.0 * p0 + pp;
        if curv < 0.0 { op.xs[k] + 0.5 * op.delta * (pm - pp) / curv } else { op.xs[k] }
    } else {
        op.xs[k]
    };
    Ok(EigenPair1D { mu, delta: op.delta, xs: op.xs.clone(), phi, x_max, residual })
}

fn rayleigh(op: &OdeOperator, u: &[f64]) -> f64 {
    let tu = op.apply(u);
    let num: f64 = tu.iter().zip(u).map(|(a, b)| a * b).sum();
    let den: f64 = u.iter().map(|v| v * v).sum();
    num / den
}
