//! Campaign configuration, the per-domain pipeline and report persistence.

use crate::derivatives::{grad_log_mixed, log_mixed_derivative, remainder_ratio, taylor_model, DerivativeField};
use crate::domain::{height_profile, length_scale};
use crate::error::{Error, Result};
use crate::families::{generate_family, FamilyKind, Member};
use crate::grid::{build_grid, Grid2D, GridOptions};
use crate::levelset::{eps_resolvable, shape_profile, LevelPolygon};
use crate::modes::{decompose, mode_remainder_norms, property_interval, psi_growth_constant, residual_sigma};
use crate::ode::{potential_from_height, solve_ground_state_1d};
use crate::pde::{locate_max, richardson_extrapolate, solve_ground_state_2d, EigenOptions};
use crate::snapshot::{sha256_file, Snapshot, SnapshotMeta};
use crate::verification::{
    check_concavity, check_eigenvalue_sandwich, check_gap_scaling, check_gradient_eps, check_h_regularity,
    check_levelset_shape, check_max_location, check_mixed_log, check_no_trend, check_psi_growth, check_second_band,
    exit_status, fit_scaling, render_csv, CheckResult, CheckStatus, DomainMetrics, ScalingFit, Thresholds,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_VERSION: u32 = 1;

/// Largest node count accepted for the fine grid under the auto rule.
pub const NODE_BUDGET: f64 = 1.0e6;

pub const DOMAIN_CHECKS: [&str; 9] = [
    "eigenvalue_sandwich",
    "levelset_shape",
    "concavity",
    "second_band",
    "max_location",
    "gradient_eps",
    "h_regularity",
    "psi_growth",
    "pipeline",
];

pub const FAMILY_CHECKS: [&str; 5] =
    ["gap_scaling", "mixed_log_scaling", "mixed_log_grad_scaling", "taylor_scaling", "uxy_star_trend"];

fn default_eps() -> Vec<f64> {
    vec![0.5, 0.25, 0.125, 0.0625, 0.03125]
}

fn default_output() -> PathBuf {
    PathBuf::from("campaign_out")
}

fn default_samples() -> usize {
    8193
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub family: FamilyKind,
    pub params: Vec<f64>,
    #[serde(default)]
    pub slope: Option<f64>,
    #[serde(default)]
    pub n_vertices: Option<usize>,
    /// Spacing of the coarser of the two grids; auto rule when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps_list: Vec<f64>,
    /// Subset of check ids to report; all when empty.
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl CampaignConfig {
    pub fn new(family: FamilyKind, params: Vec<f64>) -> Self {
        Self {
            family,
            params,
            slope: None,
            n_vertices: None,
            delta: None,
            eps_list: default_eps(),
            checks: Vec::new(),
            output: default_output(),
            n_samples: default_samples(),
            thresholds: Thresholds::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::BadParam("campaign has no family members".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::BadParam(format!("delta must be positive, got {d}")));
            }
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e <= 0.5)) {
            return Err(Error::BadParam("eps values must lie in (0, 1/2]".into()));
        }
        if self.n_samples < 16 {
            return Err(Error::BadParam("n_samples must be at least 16".into()));
        }
        for c in &self.checks {
            if !DOMAIN_CHECKS.contains(&c.as_str()) && !FAMILY_CHECKS.contains(&c.as_str()) {
                return Err(Error::Config(format!("unknown check id {c}")));
            }
        }
        Ok(())
    }

    fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            eps_list: self.eps_list.clone(),
            thresholds: self.thresholds.clone(),
            n_samples: self.n_samples,
            eigen: EigenOptions::default(),
        }
    }
}

/// `delta = min(1/64, 1/(8 ceil L))`, never below 1/256. When the fine grid
/// (`delta / 2`) would exceed the node budget the member falls back to
/// 1/64, flagged as coarse.
pub fn auto_delta(l: f64, area: f64) -> (f64, bool) {
    let d = (1.0f64 / 64.0).min(1.0 / (8.0 * l.ceil())).max(1.0 / 256.0);
    if d < 1.0 / 64.0 && area / (0.5 * d).powi(2) > NODE_BUDGET {
        (1.0 / 64.0, true)
    } else {
        (d, false)
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    pub eps_list: Vec<f64>,
    pub thresholds: Thresholds,
    pub n_samples: usize,
    pub eigen: EigenOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        CampaignConfig::new(FamilyKind::Rectangle, vec![1.0]).analysis_options()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRow {
    pub eps: f64,
    pub ratio_x: f64,
    pub ratio_y: f64,
    pub mer_angle: f64,
    pub center_offset: f64,
}

/// Everything measured on one domain, beyond the report metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainRecord {
    pub metrics: DomainMetrics,
    pub coarse_grid: bool,
    pub delta_fine: f64,
    pub nodes: (usize, usize),
    pub witness: (f64, f64),
    pub lambda_coarse: f64,
    pub lambda_fine: f64,
    pub mu_coarse: f64,
    pub mu_fine: f64,
    pub gap: f64,
    pub sup_u2: f64,
    pub grad_u2_patch_max: f64,
    pub sigma_unit_max: f64,
    pub mixed_sup: f64,
    pub mixed_grad_sup: f64,
    pub uxy_star: f64,
    pub hessian_star: (f64, f64),
    pub taylor_ratio_coarse: Option<f64>,
    pub x_bar: f64,
    pub x_bar_phi: f64,
    pub property_interval: (f64, f64),
    pub psi_growth_c: f64,
    pub eps_used: Vec<f64>,
    pub shape: Vec<ShapeRow>,
}

pub struct Analysis {
    pub record: DomainRecord,
    pub checks: Vec<CheckResult>,
    pub snapshot: Snapshot,
    pub levels: Vec<LevelPolygon>,
    pub iterations: (usize, usize),
    pub residuals: (f64, f64),
    pub wall_time: f64,
}

fn shape_error_status(e: &Error) -> CheckStatus {
    match e {
        Error::LevelTooHigh { .. } | Error::EmptyMask(_) | Error::BadParam(_) => CheckStatus::Inconclusive,
        _ => CheckStatus::Fail,
    }
}

/// Whether an error reflects insufficient resolution rather than a
/// property violation.
pub fn is_resolution_error(e: &Error) -> bool {
    matches!(
        e,
        Error::GridTooCoarse(_)
            | Error::ColumnTooThin { .. }
            | Error::LevelTooHigh { .. }
            | Error::EmptyMask(_)
            | Error::ProfileTooCoarse(_)
            | Error::TooLarge { .. }
    )
}

pub fn pipeline_failure(domain_id: &str, e: &Error) -> CheckResult {
    let mut r = CheckResult::inconclusive("pipeline", domain_id, e.to_string());
    if !is_resolution_error(e) {
        r.status = CheckStatus::Fail;
    }
    r
}

/// A solved field ready for measurement.
pub struct FieldInput<'a> {
    pub domain_id: &'a str,
    pub family: &'a str,
    pub param: f64,
    pub grid: &'a Grid2D,
    pub u: &'a [f64],
    pub lambda_fine: f64,
    /// Eigenvalue at twice the spacing; enables extrapolation.
    pub lambda_coarse: Option<f64>,
}

/// Measurements and checks on one solved field.
pub struct Measured {
    pub record: DomainRecord,
    pub checks: Vec<CheckResult>,
    pub levels: Vec<LevelPolygon>,
}

/// The full pipeline on one member: length scale, 1-D pair at two spacings,
/// 2-D pair at `delta` and `delta / 2`, extrapolation, then every
/// field-level measurement on the finer grid.
pub fn analyze(member: &Member, delta: Option<f64>, opts: &AnalysisOptions) -> Result<Analysis> {
    let start = Instant::now();
    let d = &member.domain;
    let (delta, coarse_grid) = match delta {
        Some(v) => (v, false),
        None => {
            let ls = length_scale(&height_profile(d, opts.n_samples)?)?;
            auto_delta(ls.l, d.area())
        }
    };
    let gc = build_grid(d, delta, GridOptions::default())?;
    let ec = solve_ground_state_2d(&gc, &opts.eigen)?;
    let taylor_ratio_coarse = {
        let loc = locate_max(&gc, &ec.u);
        taylor_model(&gc, &ec.u, &loc)
            .and_then(|tm| remainder_ratio(&gc, &ec.u, &tm, gc.l))
            .ok()
            .map(|r| r.sup_ratio)
    };
    let nodes_c = gc.len();
    drop(gc);
    let g = build_grid(d, 0.5 * delta, GridOptions::default())?;
    let ef = solve_ground_state_2d(&g, &opts.eigen)?;
    let family = member.spec.family.name();
    let mut m = measure(
        &FieldInput {
            domain_id: &member.id,
            family,
            param: member.spec.param,
            grid: &g,
            u: &ef.u,
            lambda_fine: ef.lambda,
            lambda_coarse: Some(ec.lambda),
        },
        opts,
    )?;
    m.record.coarse_grid = coarse_grid;
    m.record.nodes = (nodes_c, g.len());
    m.record.taylor_ratio_coarse = taylor_ratio_coarse;
    let snapshot = Snapshot {
        meta: SnapshotMeta {
            domain_id: member.id.clone(),
            family: family.to_string(),
            param: member.spec.param,
            domain: d.clone(),
            delta: g.delta,
            grid: GridOptions::default(),
            lambda: ef.lambda,
            lambda_coarse: Some(ec.lambda),
            iterations: ef.iterations,
            residual: ef.residual,
            tool_version: TOOL_VERSION.to_string(),
        },
        u: ef.u,
    };
    Ok(Analysis {
        record: m.record,
        checks: m.checks,
        snapshot,
        levels: m.levels,
        iterations: (ec.iterations, ef.iterations),
        residuals: (ec.residual, ef.residual),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Re-runs every measurement on a stored field.
pub fn analyze_snapshot(s: &Snapshot, opts: &AnalysisOptions) -> Result<Measured> {
    let g = s.grid()?;
    measure(
        &FieldInput {
            domain_id: &s.meta.domain_id,
            family: &s.meta.family,
            param: s.meta.param,
            grid: &g,
            u: &s.u,
            lambda_fine: s.meta.lambda,
            lambda_coarse: s.meta.lambda_coarse,
        },
        opts,
    )
}

/// All field-level measurements and per-domain checks.
pub fn measure(input: &FieldInput, opts: &AnalysisOptions) -> Result<Measured> {
    let th = &opts.thresholds;
    let g = input.grid;
    let d = &g.domain;
    let id = input.domain_id;
    let u = input.u;
    let hp = height_profile(d, opts.n_samples)?;
    let ls = length_scale(&hp)?;
    let l = ls.l;

    let delta1 = ((d.b() - d.a()) / 2048.0).min(1.0 / 128.0);
    let op_c = potential_from_height(&hp, delta1)?;
    let op_f = potential_from_height(&hp, 0.5 * delta1)?;
    let (e1c, e1f) = (solve_ground_state_1d(&op_c, 1e-12)?, solve_ground_state_1d(&op_f, 1e-12)?);
    let mu = richardson_extrapolate(e1c.mu, e1f.mu);
    let (lambda, eps_disc) = match input.lambda_coarse {
        Some(lc) => {
            let lambda = richardson_extrapolate(lc, input.lambda_fine);
            (lambda, (input.lambda_fine - lambda).abs() + (e1f.mu - mu).abs())
        }
        None => (input.lambda_fine, (e1f.mu - mu).abs()),
    };

    let loc = locate_max(g, u);
    let tm = taylor_model(g, u, &loc)?;
    let dec = decompose(g, u)?;
    let j = property_interval(&ls, dec.x_bar, th.c_j);
    let sigma = residual_sigma(&dec.first.xs, &dec.first.psi, &op_f, mu, j);
    let rem = mode_remainder_norms(g, &dec.u2, j);
    let psi_c = psi_growth_constant(&dec.first, dec.x_bar, &ls);
    let sup_v_minus_mu = op_f
        .xs
        .iter()
        .zip(&op_f.v)
        .filter(|(x, _)| **x >= j.0 && **x <= j.1)
        .map(|(_, v)| v - mu)
        .fold(op_f.potential_at(dec.x_bar) - mu, f64::max);
    let mixed = log_mixed_derivative(g, u, th.mixed_level)?.sup_abs();
    let mixed_grad = grad_log_mixed(g, u, th.mixed_level).map(|f| f.sup_abs()).unwrap_or(f64::NAN);
    let taylor = remainder_ratio(g, u, &tm, l)?;

    let eps_used: Vec<f64> = opts.eps_list.iter().copied().filter(|&e| eps_resolvable(e, g.delta)).collect();
    let mut checks = vec![check_eigenvalue_sandwich(id, lambda, mu, l, eps_disc, th)
        .with("extrapolated", input.lambda_coarse.is_some())];
    let mut shape = Vec::new();
    let mut levels = Vec::new();
    match shape_profile(g, u, (loc.x_star, loc.y_star), l, &eps_used) {
        Ok(p) => {
            checks.push(check_levelset_shape(id, &p, th));
            for e in p.entries {
                shape.push(ShapeRow {
                    eps: e.eps,
                    ratio_x: e.ratio_x,
                    ratio_y: e.ratio_y,
                    mer_angle: e.mer_angle,
                    center_offset: e.center_offset,
                });
                levels.push(e.polygon);
            }
        }
        Err(e) => {
            let mut r = CheckResult::inconclusive("levelset_shape", id, e.to_string());
            r.status = shape_error_status(&e);
            checks.push(r);
        }
    }
    checks.push(check_concavity(id, g, u, &tm, th));
    checks.push(check_second_band(id, g, u, l, th));
    checks.push(check_max_location(id, loc.x_star, loc.y_star, e1f.x_max, l, sup_v_minus_mu, th));
    checks.push(check_gradient_eps(id, g, u, l, &eps_used, th));
    checks.push(check_h_regularity(id, &hp, &ls, th));
    checks.push(check_psi_growth(id, psi_c, th));
    for c in &mut checks {
        c.context.insert("delta".into(), g.delta.to_string());
        c.context.insert("L".into(), l.to_string());
    }

    let l3 = l.powi(3);
    let metrics = DomainMetrics {
        domain_id: id.to_string(),
        family: input.family.to_string(),
        param: input.param,
        delta: g.delta,
        l,
        lambda,
        mu,
        gap_l3: (lambda - mu) * l3,
        sup_u2_l3: rem.sup_u2 * l3,
        mixed_l3: mixed * l3,
        taylor_ratio: taylor.sup_ratio,
        x_star: loc.x_star,
        y_star: loc.y_star,
    };
    let record = DomainRecord {
        metrics,
        coarse_grid: false,
        delta_fine: g.delta,
        nodes: (0, g.len()),
        witness: ls.witness,
        lambda_coarse: input.lambda_coarse.unwrap_or(f64::NAN),
        lambda_fine: input.lambda_fine,
        mu_coarse: e1c.mu,
        mu_fine: e1f.mu,
        gap: lambda - mu,
        sup_u2: rem.sup_u2,
        grad_u2_patch_max: rem.max_patch(),
        sigma_unit_max: sigma.max_unit_integral(),
        mixed_sup: mixed,
        mixed_grad_sup: mixed_grad,
        uxy_star: tm.uxy,
        hessian_star: (tm.uxx, tm.uyy),
        taylor_ratio_coarse: None,
        x_bar: dec.x_bar,
        x_bar_phi: e1f.x_max,
        property_interval: j,
        psi_growth_c: psi_c,
        eps_used,
        shape,
    };
    Ok(Measured { record, checks, levels })
}

/// Family-level regressions over the successfully analyzed members.
pub fn family_checks(family_id: &str, records: &[&DomainRecord], th: &Thresholds) -> (Vec<CheckResult>, Vec<ScalingFit>) {
    let pts = |f: &dyn Fn(&DomainRecord) -> f64| -> Vec<(f64, f64)> { records.iter().map(|r| (r.metrics.l, f(r))).collect() };
    let mut checks = Vec::new();
    let mut fits = Vec::new();
    let mut push = |fc: crate::verification::FamilyCheck| {
        checks.push(fc.result);
        fits.extend(fc.fit);
    };
    push(check_gap_scaling(family_id, &pts(&|r| r.gap), th));
    for fc in check_mixed_log(family_id, &pts(&|r| r.mixed_sup), &pts(&|r| r.mixed_grad_sup), th) {
        push(fc);
    }
    push(check_no_trend("taylor_scaling", family_id, &pts(&|r| r.metrics.taylor_ratio), 0.0, false, th));
    push(check_no_trend(
        "uxy_star_trend",
        family_id,
        &pts(&|r| r.uxy_star.abs() * r.metrics.l.powi(3)),
        th.floor_uxy_star,
        true,
        th,
    ));
    for (id, p) in [("sup_u2", pts(&|r| r.sup_u2)), ("sigma_unit_max", pts(&|r| r.sigma_unit_max))] {
        if let Ok(f) = fit_scaling(id, &p) {
            fits.push(f);
        }
    }
    (checks, fits)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub domain_id: String,
    pub delta: f64,
    pub delta_fine: f64,
    pub coarse_grid: bool,
    pub iterations: (usize, usize),
    pub residuals: (f64, f64),
    pub wall_time_s: f64,
    pub snapshot: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub config: CampaignConfig,
    pub domains: Vec<ManifestEntry>,
    pub failures: Vec<(String, String)>,
    /// `(file name, sha256)` of the report files.
    pub reports: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub family: String,
    pub tool_version: String,
    pub fits: Vec<ScalingFit>,
    pub checks: Vec<CheckResult>,
    pub domains: Vec<DomainRecord>,
}

pub struct CampaignOutcome {
    pub summary: CampaignSummary,
    pub manifest: CampaignManifest,
    pub csv: String,
    pub exit_status: i32,
}

/// Runs every member (up to `jobs` at once), then writes `report.csv`,
/// `summary.json`, one snapshot per member and `manifest.json` into the
/// configured output directory. A failing member is recorded and does not
/// stop the others.
pub fn run_campaign(cfg: &CampaignConfig, jobs: usize) -> Result<CampaignOutcome> {
    cfg.validate()?;
    let members = generate_family(cfg.family, &cfg.params, cfg.slope, cfg.n_vertices)?;
    let opts = cfg.analysis_options();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<Analysis>> = pool.install(|| members.par_iter().map(|m| analyze(m, cfg.delta, &opts)).collect());

    let out = &cfg.output;
    let snap_dir = out.join("snapshots");
    std::fs::create_dir_all(&snap_dir)?;
    let mut checks = Vec::new();
    let mut records = Vec::new();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (m, r) in members.iter().zip(results) {
        match r {
            Ok(a) => {
                let name = format!("{}.snap", m.id);
                let sha256 = a.snapshot.write(&snap_dir.join(&name))?;
                entries.push(ManifestEntry {
                    domain_id: m.id.clone(),
                    delta: 2.0 * a.record.delta_fine,
                    delta_fine: a.record.delta_fine,
                    coarse_grid: a.record.coarse_grid,
                    iterations: a.iterations,
                    residuals: a.residuals,
                    wall_time_s: a.wall_time,
                    snapshot: format!("snapshots/{name}"),
                    sha256,
                });
                checks.extend(a.checks);
                records.push(a.record);
            }
            Err(e) => {
                failures.push((m.id.clone(), e.to_string()));
                checks.push(pipeline_failure(&m.id, &e));
            }
        }
    }
    let family_id = format!("{}:family", cfg.family.name());
    let refs: Vec<&DomainRecord> = records.iter().collect();
    let (fam_checks, fits) = family_checks(&family_id, &refs, &cfg.thresholds);
    checks.extend(fam_checks);
    if !cfg.checks.is_empty() {
        checks.retain(|c| cfg.checks.contains(&c.check_id) || c.check_id == "pipeline");
    }
    checks.sort_by(|a, b| (&a.domain_id, &a.check_id).cmp(&(&b.domain_id, &b.check_id)));

    let metrics: Vec<DomainMetrics> = records.iter().map(|r| r.metrics.clone()).collect();
    let csv = render_csv(&metrics, &checks);
    std::fs::write(out.join("report.csv"), &csv)?;
    let summary = CampaignSummary {
        family: cfg.family.name().to_string(),
        tool_version: TOOL_VERSION.to_string(),
        fits,
        checks: checks.clone(),
        domains: records,
    };
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    let reports = ["report.csv", "summary.json"]
        .iter()
        .map(|f| Ok((f.to_string(), sha256_file(&out.join(f))?)))
        .collect::<Result<Vec<_>>>()?;
    let manifest = CampaignManifest {
        manifest_version: MANIFEST_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        config: cfg.clone(),
        domains: entries,
        failures,
        reports,
    };
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    let exit_status = exit_status(&checks);
    Ok(CampaignOutcome { summary, manifest, csv, exit_status })
}

/// Recomputes every snapshot hash listed in a manifest; returns the ids
/// whose files no longer match.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let manifest: CampaignManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut bad = Vec::new();
    for e in &manifest.domains {
        if sha256_file(&dir.join(&e.snapshot))? != e.sha256 {
            bad.push(e.domain_id.clone());
        }
    }
    Ok(bad)
}

/// Level polygons as `c,vertex_index,x,y`.
pub fn levels_csv(levels: &[LevelPolygon]) -> String {
    let mut out = String::from("c,vertex_index,x,y\n");
    for p in levels {
        for (k, v) in p.vertices.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{k},{:.16e},{:.16e}", p.c, v.x, v.y);
        }
    }
    out
}

/// Masked derivative field as `x,y,value`.
pub fn field_csv(g: &Grid2D, f: &DerivativeField) -> String {
    let mut out = String::from("x,y,value\n");
    for n in f.mask() {
        let (x, y) = g.xy(n);
        let _ = writeln!(out, "{x:.16e},{y:.16e},{:.16e}", f.values[n]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_rule() {
        assert_eq!(auto_delta(4.0, 4.0), (1.0 / 64.0, false));
        assert_eq!(auto_delta(12.0, 12.0), (1.0 / 96.0, false));
        assert_eq!(auto_delta(100.0, 2.0), (1.0 / 256.0, false));
        assert_eq!(auto_delta(9.5, 50.3), (1.0 / 64.0, true));
    }

    #[test]
    fn config_rejects_unknown_keys_and_empty_families() {
        let ok = CampaignConfig::from_toml("family = \"ellipse\"\nparams = [4, 8]\n[thresholds]\nband = 2.5\n").unwrap();
        assert_eq!(ok.thresholds.band, 2.5);
        assert_eq!(ok.thresholds.band_sq, 25.0);
        assert!(matches!(CampaignConfig::from_toml("family = \"ellipse\"\nparams = [4]\ncolour = 1\n"), Err(Error::Config(_))));
        assert!(matches!(CampaignConfig::from_toml("family = \"ellipse\"\nparams = [4]\n[thresholds]\nbandd = 1\n"), Err(Error::Config(_))));
        assert!(matches!(CampaignConfig::from_toml("family = \"ellipse\"\nparams = []\n"), Err(Error::BadParam(_))));
        assert!(matches!(CampaignConfig::from_toml("family = \"ellipse\"\nparams = [4]\nchecks = [\"nope\"]\n"), Err(Error::Config(_))));
    }

    #[test]
    fn empty_family_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = CampaignConfig::new(FamilyKind::Rectangle, vec![]);
        cfg.output = dir.path().join("out");
        assert!(matches!(run_campaign(&cfg, 1), Err(Error::BadParam(_))));
        assert!(!cfg.output.exists());
    }
}
