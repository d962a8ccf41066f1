//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson slopes).

#[derive(Clone, Debug)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    /// `xs` must be strictly increasing with at least two entries.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert!(xs.len() >= 2 && xs.len() == ys.len());
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = del[0];
            slopes[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slopes[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            slopes[0] = edge_slope(h[0], h[1], del[0], del[1]);
            slopes[n - 1] = edge_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Self { xs, ys, slopes }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let k = match self.xs.partition_point(|&t| t <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1]
    }
}

// One-sided three-point end slope with shape-preserving clamps.
fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_linear_data() {
        let xs: Vec<f64> = (0..10).map(|k| k as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let p = Pchip::new(xs, ys);
        for k in 0..50 {
            let x = k as f64 * 0.05;
            assert!((p.eval(x) - (2.0 * x - 1.0)).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn preserves_monotonicity(mut ys in proptest::collection::vec(0.0f64..1.0, 3..20), x in 0.0f64..1.0) {
            ys.sort_by(f64::total_cmp);
            let n = ys.len();
            let xs: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
            let p = Pchip::new(xs, ys.clone());
            let (a, b) = (p.eval(x), p.eval((x + 0.01).min(1.0)));
            prop_assert!(b >= a - 1e-12);
            prop_assert!(a >= ys[0] - 1e-12 && a <= ys[n - 1] + 1e-12);
        }
    }
}
