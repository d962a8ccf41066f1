//! Envelope (skyline) LU factorization without pivoting, for shifted
//! operators whose structure is symmetric even when the values are not.

use crate::error::{Error, Result};

/// Sparse square matrix given row by row as `(column, value)` pairs with a
/// structurally symmetric pattern.
pub trait RowAccess {
    fn dim(&self) -> usize;
    fn row(&self, r: usize, out: &mut Vec<(usize, f64)>);
}

pub struct EnvelopeLu {
    first: Vec<usize>,
    lptr: Vec<usize>,
    uptr: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl EnvelopeLu {
    /// Factors `A - shift I`. Fails on a non-positive pivot, which for an
    /// M-matrix means the shift is not below the smallest eigenvalue.
    pub fn factor<A: RowAccess>(a: &A, shift: f64) -> Result<Self> {
        let n = a.dim();
        let mut row = Vec::new();
        let mut first = vec![0usize; n];
        for r in 0..n {
            a.row(r, &mut row);
            first[r] = row.iter().map(|e| e.0).fold(r, usize::min);
        }
        let mut lptr = vec![0usize; n + 1];
        let mut uptr = vec![0usize; n + 1];
        for r in 0..n {
            lptr[r + 1] = lptr[r] + (r - first[r]);
            uptr[r + 1] = uptr[r] + (r - first[r] + 1);
        }
        let mut lower = vec![0.0; lptr[n]];
        let mut upper = vec![0.0; uptr[n]];
        for r in 0..n {
            a.row(r, &mut row);
            for &(c, v) in &row {
                let v = if c == r { v - shift } else { v };
                if c < r {
                    lower[lptr[r] + c - first[r]] = v;
                } else {
                    // a(r, c) with r <= c lives in column c of U
                    upper[uptr[c] + r - first[c]] = v;
                }
            }
            if !row.iter().any(|e| e.0 == r) {
                upper[uptr[r] + r - first[r]] = -shift;
            }
        }

        for k in 0..n {
            let fk = first[k];
            // row k of L
            for j in fk..k {
                let lo = fk.max(first[j]);
                let lrow = &lower[lptr[k] + lo - fk..lptr[k] + j - fk];
                let ucol = &upper[uptr[j] + lo - first[j]..uptr[j] + j - first[j]];
                let s = dot(lrow, ucol);
                let pivot = upper[uptr[j + 1] - 1];
                let idx = lptr[k] + j - fk;
                lower[idx] = (lower[idx] - s) / pivot;
            }
            // column k of U
            for i in fk..=k {
                let lo = fk.max(first[i]);
                let lrow = &lower[lptr[i] + lo - first[i]..lptr[i] + i - first[i]];
                let ucol = &upper[uptr[k] + lo - fk..uptr[k] + i - fk];
                let s = dot(lrow, ucol);
                upper[uptr[k] + i - fk] -= s;
            }
            let pivot = upper[uptr[k + 1] - 1];
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::BadParam(format!(
                    "shift {shift} is not below the spectrum (pivot {pivot:.3e} at row {k})"
                )));
            }
        }
        Ok(Self { first, lptr, uptr, lower, upper })
    }

    pub fn stored(&self) -> usize {
        self.lower.len() + self.upper.len()
    }

    /// Overwrites `b` with the solution of `(A - shift I) x = b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.first.len();
        for k in 0..n {
            let fk = self.first[k];
            let s = dot(&self.lower[self.lptr[k]..self.lptr[k + 1]], &b[fk..k]);
            b[k] -= s;
        }
        for k in (0..n).rev() {
            let fk = self.first[k];
            let col = &self.upper[self.uptr[k]..self.uptr[k + 1]];
            let xk = b[k] / col[k - fk];
            b[k] = xk;
            for (bi, u) in b[fk..k].iter_mut().zip(&col[..k - fk]) {
                *bi -= u * xk;
            }
        }
    }
}

/// Dot product with four independent accumulators (fixed summation order).
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    for k in 4 * chunks..n {
        s0 += a[k] * b[k];
    }
    (s0 + s1) + (s2 + s3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Banded(DMatrix<f64>);

    impl RowAccess for Banded {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn row(&self, r: usize, out: &mut Vec<(usize, f64)>) {
            out.clear();
            for c in 0..self.0.ncols() {
                if self.0[(r, c)] != 0.0 || self.0[(c, r)] != 0.0 {
                    out.push((c, self.0[(r, c)]));
                }
            }
        }
    }

    #[test]
    fn solves_nonsymmetric_banded_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            m[(r, r)] = 10.0 + rng.random_range(0.0..1.0);
            for off in [1usize, 5] {
                if r + off < n {
                    m[(r, r + off)] = -rng.random_range(0.0..2.0);
                    m[(r + off, r)] = -rng.random_range(0.0..2.0);
                }
            }
        }
        let lu = EnvelopeLu::factor(&Banded(m.clone()), 0.5).unwrap();
        let rhs: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        let shifted = m - DMatrix::identity(n, n) * 0.5;
        let r = shifted * DVector::from_vec(x) - DVector::from_vec(rhs);
        assert!(r.amax() < 1e-12, "residual {}", r.amax());
    }

    #[test]
    fn shift_above_spectrum_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        assert!(EnvelopeLu::factor(&Banded(m), 5.0).is_err());
    }
}
