use clap::{Args, Parser, Subcommand};
use dirichlet_lab::campaign::{
    analyze_snapshot, auto_delta, family_checks, field_csv, levels_csv, pipeline_failure, run_campaign,
    AnalysisOptions, CampaignConfig, TOOL_VERSION,
};
use dirichlet_lab::derivatives::{derivative_field, DerivativeKind};
use dirichlet_lab::domain::{height_profile, length_scale};
use dirichlet_lab::families::{member, DomainFile, DomainSpec, FamilyKind, Member};
use dirichlet_lab::grid::{build_grid, GridOptions};
use dirichlet_lab::levelset::extract_superlevel;
use dirichlet_lab::pde::{dense_oracle_ground_state, locate_max, solve_ground_state_2d, EigenOptions};
use dirichlet_lab::snapshot::{Snapshot, SnapshotMeta};
use dirichlet_lab::verification::{exit_status, render_csv, CheckStatus, DomainMetrics};
use dirichlet_lab::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Ground states of convex Dirichlet domains and the shape of their level sets.
#[derive(Parser)]
#[command(name = "dlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one domain and write its snapshot.
    Solve(SolveArgs),
    /// Extract superlevel polygons (and optionally a derivative field) from a snapshot.
    Levels(LevelsArgs),
    /// Run every per-domain check on stored snapshots.
    Verify(VerifyArgs),
    /// Run the full pipeline over a family.
    Campaign(CampaignArgs),
    /// Cross-check the iterative solver against a dense eigensolver on a small grid.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct DomainArgs {
    /// Domain file (`family` + `params`, or `polygon`).
    #[arg(long, conflicts_with = "family")]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_family)]
    family: Option<FamilyKind>,
    /// Main family parameter (a, A, N or len).
    #[arg(long)]
    param: Option<f64>,
    #[arg(long)]
    slope: Option<f64>,
    #[arg(long)]
    vertices: Option<usize>,
    /// Seed for `random_hull`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Spacing of the stored field; half the auto rule when absent.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct LevelsArgs {
    snapshot: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125,0.0625")]
    eps: Vec<f64>,
    /// Also write a masked derivative field, e.g. `log_uxy`.
    #[arg(long)]
    field: Option<String>,
    /// Superlevel defining the derivative mask.
    #[arg(long, default_value_t = 0.9)]
    level: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(required = true)]
    snapshots: Vec<PathBuf>,
    /// Campaign file supplying thresholds and eps values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Single seed for a `random_hull` campaign; replaces `params`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Grid spacing; the finest dyadic spacing within the dense limit when absent.
    #[arg(long)]
    delta: Option<f64>,
}

fn parse_family(s: &str) -> std::result::Result<FamilyKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown family {s}"))
}

fn resolve_domain(a: &DomainArgs) -> Result<Member> {
    if let Some(path) = &a.config {
        return DomainFile::from_toml(&std::fs::read_to_string(path)?)?.to_member();
    }
    let family = a.family.ok_or_else(|| Error::Config("give --config or --family".into()))?;
    let param = match (family, a.seed) {
        (FamilyKind::RandomHull, Some(s)) => s as f64,
        _ => a.param.ok_or_else(|| Error::Config("--param is required".into()))?,
    };
    member(&DomainSpec { family, param, slope: a.slope, n_vertices: a.vertices })
}

fn solve(a: &SolveArgs) -> Result<i32> {
    let m = resolve_domain(&a.domain)?;
    let delta = match a.delta {
        Some(d) => d,
        None => {
            let ls = length_scale(&height_profile(&m.domain, 8193)?)?;
            0.5 * auto_delta(ls.l, m.domain.area()).0
        }
    };
    let opts = EigenOptions::default();
    let g = build_grid(&m.domain, delta, GridOptions::default())?;
    let fine = solve_ground_state_2d(&g, &opts)?;
    let lambda_coarse = match build_grid(&m.domain, 2.0 * delta, GridOptions::default()) {
        Ok(gc) => Some(solve_ground_state_2d(&gc, &opts)?.lambda),
        Err(Error::GridTooCoarse(_)) => None,
        Err(e) => return Err(e),
    };
    let snap = Snapshot {
        meta: SnapshotMeta {
            domain_id: m.id.clone(),
            family: m.spec.family.name().to_string(),
            param: m.spec.param,
            domain: m.domain.clone(),
            delta,
            grid: GridOptions::default(),
            lambda: fine.lambda,
            lambda_coarse,
            iterations: fine.iterations,
            residual: fine.residual,
            tool_version: TOOL_VERSION.to_string(),
        },
        u: fine.u,
    };
    std::fs::create_dir_all(&a.out)?;
    let path = a.out.join(format!("{}.snap", m.id));
    let sha = snap.write(&path)?;
    println!("{} lambda={:.12} nodes={} delta={delta} sha256={sha}", path.display(), snap.meta.lambda, g.len());
    if let Some(lc) = lambda_coarse {
        println!("lambda(2 delta)={lc:.12}");
    }
    Ok(0)
}

fn levels(a: &LevelsArgs) -> Result<i32> {
    let s = Snapshot::read(&a.snapshot)?;
    let g = s.grid()?;
    let loc = locate_max(&g, &s.u);
    let polys = a
        .eps
        .iter()
        .map(|&eps| extract_superlevel(&g, &s.u, 1.0 - eps, (loc.x_star, loc.y_star)))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("levels.csv"), levels_csv(&polys))?;
    for p in &polys {
        println!(
            "c={:.6} vertices={} proj_x={:.6} proj_y={:.6} angle={:.4}",
            p.c,
            p.vertices.len(),
            p.proj_x,
            p.proj_y,
            p.mer.axis_deviation()
        );
    }
    if let Some(name) = &a.field {
        let kind = DerivativeKind::parse(name).ok_or_else(|| Error::Config(format!("unknown field {name}")))?;
        let f = derivative_field(&g, &s.u, kind, a.level)?;
        std::fs::write(a.out.join(format!("{}.csv", kind.name())), field_csv(&g, &f))?;
        println!("{}: {} nodes, sup {:.6e}", kind.name(), f.mask_len(), f.sup_abs());
    }
    Ok(0)
}

fn analysis_options(config: Option<&Path>, eps: Option<&Vec<f64>>) -> Result<AnalysisOptions> {
    let mut opts = AnalysisOptions::default();
    if let Some(path) = config {
        let cfg = CampaignConfig::load(path)?;
        opts.thresholds = cfg.thresholds;
        opts.eps_list = cfg.eps_list;
        opts.n_samples = cfg.n_samples;
    }
    if let Some(e) = eps {
        opts.eps_list = e.clone();
    }
    Ok(opts)
}

fn verify(a: &VerifyArgs) -> Result<i32> {
    let opts = analysis_options(a.config.as_deref(), a.eps.as_ref())?;
    let mut checks = Vec::new();
    let mut records = Vec::new();
    let mut family = None;
    for path in &a.snapshots {
        let s = Snapshot::read(path)?;
        family.get_or_insert_with(|| s.meta.family.clone());
        match analyze_snapshot(&s, &opts) {
            Ok(m) => {
                checks.extend(m.checks);
                records.push(m.record);
            }
            Err(e) => checks.push(pipeline_failure(&s.meta.domain_id, &e)),
        }
    }
    if records.len() >= 3 {
        let refs: Vec<_> = records.iter().collect();
        let id = format!("{}:family", family.unwrap_or_default());
        checks.extend(family_checks(&id, &refs, &opts.thresholds).0);
    }
    let metrics: Vec<DomainMetrics> = records.iter().map(|r| r.metrics.clone()).collect();
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("report.csv"), render_csv(&metrics, &checks))?;
    report(&checks);
    Ok(exit_status(&checks))
}

fn campaign(a: &CampaignArgs) -> Result<i32> {
    let mut cfg = CampaignConfig::load(&a.config)?;
    if let Some(out) = &a.out {
        cfg.output = out.clone();
    }
    if a.delta.is_some() {
        cfg.delta = a.delta;
    }
    if let Some(e) = &a.eps {
        cfg.eps_list = e.clone();
    }
    if let Some(seed) = a.seed {
        if cfg.family != FamilyKind::RandomHull {
            return Err(Error::Config("--seed applies to random_hull campaigns".into()));
        }
        cfg.params = vec![seed as f64];
    }
    let outcome = run_campaign(&cfg, a.jobs)?;
    for f in &outcome.summary.fits {
        println!("fit {}: slope {:.4} r2 {:.4}", f.quantity_id, f.slope, f.r_squared);
    }
    report(&outcome.summary.checks);
    println!("wrote {}", cfg.output.display());
    Ok(outcome.exit_status)
}

fn oracle(a: &OracleArgs) -> Result<i32> {
    let m = resolve_domain(&a.domain)?;
    let opts = GridOptions::relaxed();
    let g = match a.delta {
        Some(d) => build_grid(&m.domain, d, opts)?,
        None => {
            let mut best = None;
            let mut d = 0.25;
            while d > 1e-3 {
                match build_grid(&m.domain, d, opts) {
                    Ok(g) if g.len() > 2500 => break,
                    Ok(g) => best = Some(g),
                    Err(Error::GridTooCoarse(_)) => {}
                    Err(e) => return Err(e),
                }
                d *= 0.5;
            }
            best.ok_or_else(|| Error::GridTooCoarse("no dyadic spacing fits the dense limit".into()))?
        }
    };
    let it = solve_ground_state_2d(&g, &EigenOptions::default())?;
    let dense = dense_oracle_ground_state(&g)?;
    let rel = (it.lambda - dense.lambda).abs() / dense.lambda;
    let dot: f64 = it.u.iter().zip(&dense.u).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cosine = dot / (norm(&it.u) * norm(&dense.u));
    let ok = rel <= 1e-9 && cosine >= 1.0 - 1e-8;
    println!(
        "{} delta={} nodes={} lambda={:.14} dense={:.14} rel={rel:.3e} cosine={cosine:.15} {}",
        m.id,
        g.delta,
        g.len(),
        it.lambda,
        dense.lambda,
        if ok { "PASS" } else { "FAIL" }
    );
    Ok(if ok { 0 } else { 1 })
}

fn report(checks: &[dirichlet_lab::verification::CheckResult]) {
    for c in checks.iter().filter(|c| c.status != CheckStatus::Pass) {
        let reason = c.context.get("reason").or_else(|| c.context.get("detail")).cloned().unwrap_or_default();
        println!("{} {} {} {reason}", c.status.as_str(), c.domain_id, c.check_id);
    }
    let count = |s| checks.iter().filter(|c| c.status == s).count();
    println!(
        "{} checks: {} pass, {} fail, {} inconclusive",
        checks.len(),
        count(CheckStatus::Pass),
        count(CheckStatus::Fail),
        count(CheckStatus::Inconclusive)
    );
}

fn main() -> ExitCode {
    // Usage errors share the generic error status; 2 means inconclusive.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Levels(a) => levels(a),
        Command::Verify(a) => verify(a),
        Command::Campaign(a) => campaign(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
