//! Named checks with pass/fail/inconclusive outcomes, log-log scaling fits
//! and the campaign report format.

use crate::derivatives::{alpha_nu, directional_second, directions, gradient_sups, max_hessian_eigenvalue, TaylorModel};
use crate::domain::{HeightProfile, LengthScale};
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::levelset::ShapeProfile;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "true",
            Self::Fail => "false",
            Self::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    pub domain_id: String,
    pub status: CheckStatus,
    pub statistic: f64,
    pub threshold: f64,
    pub context: BTreeMap<String, String>,
}

impl CheckResult {
    fn new(check_id: &str, domain_id: &str, status: CheckStatus, statistic: f64, threshold: f64) -> Self {
        Self {
            check_id: check_id.to_string(),
            domain_id: domain_id.to_string(),
            status,
            statistic,
            threshold,
            context: BTreeMap::new(),
        }
    }

    fn judged(check_id: &str, domain_id: &str, ok: bool, statistic: f64, threshold: f64) -> Self {
        let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
        Self::new(check_id, domain_id, status, statistic, threshold)
    }

    /// A result that could not be decided; statistic and threshold are zero.
    pub fn inconclusive(check_id: &str, domain_id: &str, reason: impl Into<String>) -> Self {
        Self::new(check_id, domain_id, CheckStatus::Inconclusive, 0.0, 0.0).with("reason", reason.into())
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.context.insert(key.to_string(), value.to_string());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub quantity_id: String,
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `log value` against `log L`.
pub fn fit_scaling(quantity_id: &str, points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::BadParam(format!("{quantity_id}: a fit needs at least 3 points")));
    }
    if points.iter().any(|&(l, v)| !(l > 0.0 && v > 0.0 && l.is_finite() && v.is_finite())) {
        return Err(Error::BadParam(format!("{quantity_id}: fit points must be positive")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::BadParam(format!("{quantity_id}: all L values coincide")));
    }
    let slope = sxy / sxx;
    let r_squared = if syy <= 1e-300 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(ScalingFit {
        quantity_id: quantity_id.to_string(),
        points: points.to_vec(),
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Calibration parameters. They encode discretization slack and the
/// measured size of unnamed constants, not mathematics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Sandwich constant: `lambda - mu <= c_cal L^-3`.
    pub c_cal: f64,
    /// Spread allowed for the projection ratios across eps.
    pub band: f64,
    /// Largest axis deviation of the enclosing rectangle for eps <= 1/4.
    pub angle_tol: f64,
    /// Largest relative convexity defect of an extracted level polygon.
    pub defect_tol: f64,
    /// Spread allowed for `-d_nu^2 u / alpha_nu` within one direction.
    pub band_sq: f64,
    /// Concavity tolerance relative to `|uyy*|`.
    pub conc_rel: f64,
    pub loc_c: f64,
    /// Constant in `V - mu <= -1/(C L^2)` on `J`.
    pub potential_c: f64,
    pub grad_c: f64,
    pub grad_dir_c: f64,
    pub h_c: f64,
    pub psi_c: f64,
    /// `J` is the witness interval cut to `|x - x_bar| <= L / c_j`.
    pub c_j: f64,
    pub slope_window: (f64, f64),
    pub min_r_squared: f64,
    /// Largest allowed `|slope|` for quantities expected to be L-independent.
    pub trend_tol: f64,
    pub concavity_level: f64,
    pub mixed_level: f64,
    pub second_band_level: f64,
    pub floor_gap: f64,
    pub floor_mixed: f64,
    pub floor_mixed_grad: f64,
    pub floor_uxy_star: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            c_cal: 50.0,
            band: 3.0,
            angle_tol: 0.1,
            defect_tol: 1e-3,
            band_sq: 25.0,
            conc_rel: 1e-6,
            loc_c: 2.0,
            potential_c: 2.0,
            grad_c: 5.0,
            grad_dir_c: 10.0,
            h_c: 10.0,
            psi_c: 10.0,
            c_j: 8.0,
            slope_window: (-4.0, -2.0),
            min_r_squared: 0.9,
            trend_tol: 0.5,
            concavity_level: 0.9,
            mixed_level: 0.9,
            second_band_level: 0.95,
            floor_gap: 1e-5,
            floor_mixed: 5e-4,
            floor_mixed_grad: 5e-3,
            floor_uxy_star: 1e-8,
        }
    }
}

/// `mu - eps <= lambda <= mu + c_cal L^-3 + eps`, reported as `(lambda - mu) L^3`.
pub fn check_eigenvalue_sandwich(
    domain_id: &str,
    lambda: f64,
    mu: f64,
    l: f64,
    eps_disc: f64,
    th: &Thresholds,
) -> CheckResult {
    let stat = (lambda - mu) * l.powi(3);
    let below = lambda < mu - eps_disc;
    let ok = !below && lambda <= mu + th.c_cal / l.powi(3) + eps_disc;
    let mut r = CheckResult::judged("eigenvalue_sandwich", domain_id, ok, stat, th.c_cal)
        .with("lambda", lambda)
        .with("mu", mu)
        .with("eps_disc", eps_disc);
    if below {
        r = r.with("detail", "MU_EXCEEDS_LAMBDA");
    }
    r
}

pub fn check_levelset_shape(domain_id: &str, profile: &ShapeProfile, th: &Thresholds) -> CheckResult {
    if profile.entries.len() < 2 {
        return CheckResult::inconclusive("levelset_shape", domain_id, "fewer than two resolvable levels");
    }
    let stat = profile.spread_x.max(profile.spread_y);
    let defect = profile.entries.iter().map(|e| e.polygon.convexity_defect).fold(0.0, f64::max);
    let ok = profile.spread_x <= th.band
        && profile.spread_y <= th.band
        && profile.max_angle <= th.angle_tol
        && defect <= th.defect_tol;
    let oriented = profile.entries.iter().filter(|e| e.eps <= 0.25 && e.orientation_defined).count();
    CheckResult::judged("levelset_shape", domain_id, ok, stat, th.band)
        .with("spread_x", profile.spread_x)
        .with("spread_y", profile.spread_y)
        .with("max_angle", profile.max_angle)
        .with("angle_tol", th.angle_tol)
        .with("convexity_defect", defect)
        .with("oriented_levels", oriented)
        .with("levels", profile.entries.len())
}

pub fn check_concavity(domain_id: &str, g: &Grid2D, u: &[f64], tm: &TaylorModel, th: &Thresholds) -> CheckResult {
    let tol = th.conc_rel * tm.uyy.abs();
    match max_hessian_eigenvalue(g, u, th.concavity_level) {
        Ok((top, node, count)) => {
            let (x, y) = g.xy(node);
            CheckResult::judged("concavity", domain_id, top <= tol, top, tol)
                .with("level", th.concavity_level)
                .with("mask", count)
                .with("at", format!("({x},{y})"))
        }
        Err(e) => CheckResult::inconclusive("concavity", domain_id, e.to_string()),
    }
}

pub fn check_second_band(domain_id: &str, g: &Grid2D, u: &[f64], l: f64, th: &Thresholds) -> CheckResult {
    let mut worst: f64 = 1.0;
    let mut nonpositive = false;
    let mut mask = 0;
    for (a, b) in directions(16) {
        let f = match directional_second(g, u, (a, b), th.second_band_level) {
            Ok(f) => f,
            Err(e) => return CheckResult::inconclusive("second_band", domain_id, e.to_string()),
        };
        mask = f.mask_len();
        let alpha = alpha_nu(b, l);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for n in f.mask() {
            let q = -f.values[n] / alpha;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        if lo <= 0.0 {
            nonpositive = true;
        } else {
            worst = worst.max(hi / lo);
        }
    }
    let stat = if nonpositive { f64::MAX } else { worst };
    let mut r = CheckResult::judged("second_band", domain_id, !nonpositive && worst <= th.band_sq, stat, th.band_sq)
        .with("level", th.second_band_level)
        .with("mask", mask);
    if nonpositive {
        r = r.with("detail", "NONPOSITIVE_SECOND_DERIVATIVE");
    }
    r
}

/// `|x* - x_bar_phi| <= C`, `|y* - 1/2| L^{3/2} <= C`, and `V - mu <=
/// -1/(C L^2)` on `J` (given as `sup_J (V - mu)`).
pub fn check_max_location(
    domain_id: &str,
    x_star: f64,
    y_star: f64,
    x_bar_phi: f64,
    l: f64,
    sup_v_minus_mu: f64,
    th: &Thresholds,
) -> CheckResult {
    let sx = (x_star - x_bar_phi).abs();
    let sy = (y_star - 0.5).abs() * l.powf(1.5);
    let cv = if sup_v_minus_mu < 0.0 { -1.0 / (l * l * sup_v_minus_mu) } else { f64::MAX };
    let ok = sx <= th.loc_c && sy <= th.loc_c && cv <= th.potential_c;
    CheckResult::judged("max_location", domain_id, ok, sx.max(sy), th.loc_c)
        .with("x_offset", sx)
        .with("y_offset_scaled", sy)
        .with("potential_c", cv)
        .with("potential_threshold", th.potential_c)
}

/// `sup_{Omega_{1-eps}} |grad u| <= C sqrt(eps)` over the eps grid, with the
/// directional refinement `|d_nu u| <= C sqrt(eps) L^-1 max(1, |b| L)`.
pub fn check_gradient_eps(domain_id: &str, g: &Grid2D, u: &[f64], l: f64, eps_list: &[f64], th: &Thresholds) -> CheckResult {
    let dirs = directions(16);
    let (mut stat, mut dir_stat, mut used) = (0.0f64, 0.0f64, 0);
    for &eps in eps_list {
        let Ok((sup, dir_sup)) = gradient_sups(g, u, 1.0 - eps, &dirs) else { continue };
        used += 1;
        let s = eps.sqrt();
        stat = stat.max(sup / s);
        for ((_, b), d) in dirs.iter().zip(dir_sup) {
            dir_stat = dir_stat.max(d / (s / l * (b.abs() * l).max(1.0)));
        }
    }
    if used == 0 {
        return CheckResult::inconclusive("gradient_eps", domain_id, "no level had a nonempty gradient mask");
    }
    CheckResult::judged("gradient_eps", domain_id, stat <= th.grad_c && dir_stat <= th.grad_dir_c, stat, th.grad_c)
        .with("directional_c", dir_stat)
        .with("directional_threshold", th.grad_dir_c)
        .with("levels", used)
}

/// On the witness interval: `sup |h'| L^3` and the largest total variation
/// of the piecewise slope over a unit subinterval, times `L^3`.
pub fn check_h_regularity(domain_id: &str, hp: &HeightProfile, ls: &LengthScale, th: &Thresholds) -> CheckResult {
    let (lo, hi) = ls.witness;
    let pts: Vec<(f64, f64)> = hp.xs.iter().zip(&hp.hs).filter(|(x, _)| **x >= lo && **x <= hi).map(|(x, h)| (*x, *h)).collect();
    if pts.len() < 3 {
        return CheckResult::inconclusive("h_regularity", domain_id, "fewer than 3 samples on the witness interval");
    }
    let slopes: Vec<(f64, f64)> = pts.windows(2).map(|w| (0.5 * (w[0].0 + w[1].0), (w[1].1 - w[0].1) / (w[1].0 - w[0].0))).collect();
    let sup_slope = slopes.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    let mut tv_max = 0.0f64;
    let mut start = lo;
    loop {
        let end = (start + 1.0).min(hi);
        let tv: f64 = slopes
            .windows(2)
            .filter(|w| w[0].0 >= start && w[1].0 <= end)
            .map(|w| (w[1].1 - w[0].1).abs())
            .sum();
        tv_max = tv_max.max(tv);
        if end >= hi {
            break;
        }
        start = end;
    }
    let l3 = ls.l.powi(3);
    let (a, b) = (sup_slope * l3, tv_max * l3);
    CheckResult::judged("h_regularity", domain_id, a <= th.h_c && b <= th.h_c, a.max(b), th.h_c)
        .with("slope_l3", a)
        .with("curvature_l3", b)
}

pub fn check_psi_growth(domain_id: &str, constant: f64, th: &Thresholds) -> CheckResult {
    if !constant.is_finite() {
        return CheckResult::judged("psi_growth", domain_id, false, f64::MAX, th.psi_c).with("detail", "NO_CONSTANT_UP_TO_1E6");
    }
    CheckResult::judged("psi_growth", domain_id, constant <= th.psi_c, constant, th.psi_c)
}

/// Outcome of a family-level regression check, with the fit when one was made.
pub struct FamilyCheck {
    pub result: CheckResult,
    pub fit: Option<ScalingFit>,
}

/// Points at or below `floor` are treated as numerically zero: if all are,
/// the bound holds trivially; a mixed set with fewer than three points above
/// the floor cannot be fitted.
fn floored_fit(check_id: &str, family_id: &str, points: &[(f64, f64)], floor: f64) -> std::result::Result<ScalingFit, CheckResult> {
    if points.len() < 3 {
        return Err(CheckResult::inconclusive(check_id, family_id, format!("{} points, need 3", points.len())));
    }
    let above: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > floor).collect();
    if above.is_empty() {
        let top = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        return Err(CheckResult::judged(check_id, family_id, true, top, floor).with("detail", "BELOW_NOISE_FLOOR"));
    }
    if above.len() < 3 {
        return Err(CheckResult::inconclusive(
            check_id,
            family_id,
            format!("{} of {} points above the noise floor {floor:e}", above.len(), points.len()),
        ));
    }
    fit_scaling(check_id, &above).map_err(|e| CheckResult::inconclusive(check_id, family_id, e.to_string()))
}

fn slope_check(check_id: &str, family_id: &str, points: &[(f64, f64)], floor: f64, need_r2: bool, th: &Thresholds) -> FamilyCheck {
    match floored_fit(check_id, family_id, points, floor) {
        Err(result) => FamilyCheck { result, fit: None },
        Ok(fit) => {
            let (lo, hi) = th.slope_window;
            let in_window = fit.slope >= lo && fit.slope <= hi;
            let ok = in_window && (!need_r2 || fit.r_squared >= th.min_r_squared);
            let result = CheckResult::judged(check_id, family_id, ok, fit.slope, hi)
                .with("window", format!("[{lo},{hi}]"))
                .with("r_squared", fit.r_squared)
                .with("min_r_squared", if need_r2 { th.min_r_squared } else { 0.0 });
            FamilyCheck { result, fit: Some(fit) }
        }
    }
}

/// `lambda - mu` against `L`.
pub fn check_gap_scaling(family_id: &str, points: &[(f64, f64)], th: &Thresholds) -> FamilyCheck {
    slope_check("gap_scaling", family_id, points, th.floor_gap, true, th)
}

/// `sup |d_x d_y log u|` against `L`, and the separate fit of its gradient.
pub fn check_mixed_log(family_id: &str, values: &[(f64, f64)], grads: &[(f64, f64)], th: &Thresholds) -> Vec<FamilyCheck> {
    vec![
        slope_check("mixed_log_scaling", family_id, values, th.floor_mixed, true, th),
        slope_check("mixed_log_grad_scaling", family_id, grads, th.floor_mixed_grad, false, th),
    ]
}

/// A quantity expected to stay bounded: `|slope| <= trend_tol` (or, with
/// `one_sided`, only `slope <= trend_tol`), and every value finite.
pub fn check_no_trend(check_id: &str, family_id: &str, points: &[(f64, f64)], floor: f64, one_sided: bool, th: &Thresholds) -> FamilyCheck {
    if points.iter().any(|p| !p.1.is_finite()) {
        return FamilyCheck {
            result: CheckResult::judged(check_id, family_id, false, f64::MAX, th.trend_tol).with("detail", "NONFINITE_VALUE"),
            fit: None,
        };
    }
    match floored_fit(check_id, family_id, points, floor) {
        Err(result) => FamilyCheck { result, fit: None },
        Ok(fit) => {
            let ok = if one_sided { fit.slope <= th.trend_tol } else { fit.slope.abs() <= th.trend_tol };
            let result = CheckResult::judged(check_id, family_id, ok, if one_sided { fit.slope } else { fit.slope.abs() }, th.trend_tol)
                .with("r_squared", fit.r_squared);
            FamilyCheck { result, fit: Some(fit) }
        }
    }
}

/// Per-domain summary quantities carried into every report row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainMetrics {
    pub domain_id: String,
    pub family: String,
    pub param: f64,
    pub delta: f64,
    pub l: f64,
    pub lambda: f64,
    pub mu: f64,
    pub gap_l3: f64,
    pub sup_u2_l3: f64,
    pub mixed_l3: f64,
    pub taylor_ratio: f64,
    pub x_star: f64,
    pub y_star: f64,
}

pub const CSV_HEADER: &str = "domain_id,family,param,delta,L,lambda,mu,gap_L3,sup_u2_L3,mixed_L3,taylor_ratio,x_star,y_star,check_id,passed,statistic,threshold";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders the report with a fixed column order and rows sorted by
/// `(domain_id, check_id)`. Checks without metrics (family-level rows)
/// leave the metric columns empty.
pub fn render_csv(metrics: &[DomainMetrics], checks: &[CheckResult]) -> String {
    let by_id: BTreeMap<&str, &DomainMetrics> = metrics.iter().map(|m| (m.domain_id.as_str(), m)).collect();
    let mut rows: Vec<&CheckResult> = checks.iter().collect();
    rows.sort_by(|a, b| (&a.domain_id, &a.check_id).cmp(&(&b.domain_id, &b.check_id)));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in rows {
        let cols = match by_id.get(c.domain_id.as_str()) {
            Some(m) => [
                m.family.clone(),
                num(m.param),
                num(m.delta),
                num(m.l),
                num(m.lambda),
                num(m.mu),
                num(m.gap_l3),
                num(m.sup_u2_l3),
                num(m.mixed_l3),
                num(m.taylor_ratio),
                num(m.x_star),
                num(m.y_star),
            ]
            .join(","),
            None => ",".repeat(11),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.domain_id,
            cols,
            c.check_id,
            c.status.as_str(),
            num(c.statistic),
            num(c.threshold)
        );
    }
    out
}

/// Exit status for a set of checks: 0 all pass, 1 any failure, 2 otherwise
/// inconclusive.
pub fn exit_status(checks: &[CheckResult]) -> i32 {
    if checks.iter().any(|c| c.status == CheckStatus::Fail) {
        1
    } else if checks.iter().any(|c| c.status == CheckStatus::Inconclusive) {
        2
    } else {
        0
    }
}
