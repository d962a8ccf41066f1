use dirichlet_lab::derivatives::{derivative_field_of, third_derivative_identity_defect, DerivativeKind};
use dirichlet_lab::families::{member, DomainSpec, FamilyKind};
use dirichlet_lab::grid::{build_grid, Grid2D, GridOptions};
use dirichlet_lab::pde::{solve_ground_state_2d, EigenOptions};

fn solved(family: FamilyKind, param: f64, delta: f64) -> (Grid2D, Vec<f64>, f64) {
    let m = member(&DomainSpec { family, param, slope: Some(2.0), n_vertices: None }).unwrap();
    let g = build_grid(&m.domain, delta, GridOptions::default()).unwrap();
    let e = solve_ground_state_2d(&g, &EigenOptions::default()).unwrap();
    (g, e.u, e.lambda)
}

/// Whether the disc of radius `r` around `(x, y)` lies in the domain,
/// probed in sixteen directions.
fn clear_of_boundary(g: &Grid2D, x: f64, y: f64, r: f64) -> bool {
    (0..16).all(|k| {
        let t = k as f64 * std::f64::consts::PI / 8.0;
        g.domain.contains(x + r * t.cos(), y + r * t.sin())
    })
}

/// Largest eigenvalue of the finite-difference Hessian of `log u` over
/// `{u >= level}` minus a boundary layer of `clearance` cells, and the
/// largest Hessian magnitude there. Second differences of `log u` lose all
/// accuracy within a couple of cells of the boundary, where `log u` has
/// curvature of order `dist^-2`.
fn log_hessian_top(g: &Grid2D, u: &[f64], level: f64, clearance: f64) -> (f64, f64) {
    let lu: Vec<f64> = u.iter().map(|v| v.ln()).collect();
    let f = |k| derivative_field_of(g, &lu, u, k, level).unwrap();
    let (xx, xy, yy) = (f(DerivativeKind::Uxx), f(DerivativeKind::Uxy), f(DerivativeKind::Uyy));
    let (mut top, mut scale) = (f64::NEG_INFINITY, 0.0f64);
    for n in xy.mask() {
        let (x, y) = g.xy(n);
        let (Some(a), Some(c)) = (xx.get(n), yy.get(n)) else { continue };
        if !clear_of_boundary(g, x, y, clearance * g.delta) {
            continue;
        }
        let b = xy.values[n];
        let mean = 0.5 * (a + c);
        let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        top = top.max(mean + r);
        scale = scale.max((mean - r).abs());
    }
    (top, scale)
}

#[test]
fn ground_states_are_log_concave_away_from_the_boundary() {
    for (family, param) in [(FamilyKind::Ellipse, 4.0), (FamilyKind::Stadium, 3.0), (FamilyKind::RightTriangle, 3.0)] {
        let (g, u, _) = solved(family, param, 1.0 / 64.0);
        let (top, scale) = log_hessian_top(&g, &u, 0.05, 4.0);
        assert!(top <= 1e-3 * scale, "{family:?}: top eigenvalue {top:.3e}, scale {scale:.3e}");
    }
}

#[test]
fn third_order_log_identity_converges_near_the_maximum() {
    let defects: Vec<f64> = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
        .iter()
        .map(|&d| {
            let (g, u, _) = solved(FamilyKind::Ellipse, 4.0, d);
            third_derivative_identity_defect(&g, &u, 0.5).unwrap()
        })
        .collect();
    assert!(defects.windows(2).all(|w| w[1] < 0.6 * w[0]), "{defects:?}");
    assert!(defects[2] < 0.1, "{defects:?}");
    let (g, u, _) = solved(FamilyKind::Trapezoid, 5.0, 1.0 / 64.0);
    assert!(third_derivative_identity_defect(&g, &u, 0.5).unwrap() < 1e-2);
}

/// `Delta log u = -lambda - |grad log u|^2`, up to differencing error.
fn log_laplacian_defect(delta: f64) -> f64 {
    let (g, u, lambda) = solved(FamilyKind::Trapezoid, 5.0, delta);
    let lu: Vec<f64> = u.iter().map(|v| v.ln()).collect();
    let f = |k| derivative_field_of(&g, &lu, &u, k, 0.5).unwrap();
    let (lxx, lyy, lx, ly) = (f(DerivativeKind::Uxx), f(DerivativeKind::Uyy), f(DerivativeKind::Ux), f(DerivativeKind::Uy));
    let mut worst = 0.0f64;
    for n in lxx.mask() {
        let (Some(c), Some(x), Some(y)) = (lyy.get(n), lx.get(n), ly.get(n)) else { continue };
        worst = worst.max((lxx.values[n] + c + lambda + x * x + y * y).abs() / lambda);
    }
    worst
}

#[test]
fn log_laplacian_matches_eigenvalue_identity() {
    let (coarse, fine) = (log_laplacian_defect(1.0 / 32.0), log_laplacian_defect(1.0 / 64.0));
    assert!(fine < 2e-3, "{fine}");
    assert!(fine < 0.7 * coarse, "{coarse} -> {fine}");
}
