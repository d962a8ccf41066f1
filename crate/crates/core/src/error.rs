use thiserror::Error;

/// Errors raised across the toolkit. Variants mirror the failure modes each
/// stage can report; callers in the campaign runner record them per domain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input is not convex: hull area defect {defect:.3e} exceeds {tol:.1e}")]
    NonConvexInput { defect: f64, tol: f64 },
    #[error("degenerate input: area {area:.3e}")]
    DegenerateInput { area: f64 },
    #[error("invalid boundary functions: {0}")]
    InvalidBoundary(String),
    #[error("height profile too coarse: {0}")]
    ProfileTooCoarse(String),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("ground state is not positive: minimum value {min:.3e}")]
    NonPositiveGroundState { min: f64 },
    #[error("dense oracle is limited to {max} nodes, grid has {nodes}")]
    TooLarge { nodes: usize, max: usize },
    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("column at x = {x} has only {nodes} interior nodes")]
    ColumnTooThin { x: f64, nodes: usize },
    #[error("level {c} too high: superlevel set covers only {cells} grid cells")]
    LevelTooHigh { c: f64, cells: usize },
    #[error("level {c} splits into {loops} contour loops")]
    MultipleComponents { c: f64, loops: usize },
    #[error("empty mask for {0}")]
    EmptyMask(String),
    #[error("degenerate Hessian at the maximum: uxx = {uxx:.3e}, uyy = {uyy:.3e}")]
    DegenerateHessian { uxx: f64, uyy: f64 },
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
