use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate machine parameters: {0}")]
    DegenerateMachine(String),

    #[error("no equilibrium after {iterations} Newton iterations (last residual {residual:.3e})")]
    NoEquilibrium { iterations: usize, residual: f64 },

    #[error("algebraic solve failed at t = {time:.6} s: {reason}")]
    AlgebraicFailure { time: f64, reason: String },

    #[error("time-scale separation violated: {0}")]
    TimeScale(String),

    #[error(
        "eigenvector matrix is ill-conditioned (condition number {0:.3e}); \
         inject reduced coefficients instead of deriving them"
    )]
    IllConditioned(f64),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("schedule infeasible: {family} ({detail})")]
    Infeasible { family: String, detail: String },

    #[error("solver limit reached without an incumbent after {nodes} nodes")]
    NoIncumbent { nodes: usize },

    #[error("scenario error at `{path}`: {message}")]
    Scenario { path: String, message: String },

    #[error("no epsilon in [{eps_min}, 0] satisfies the specification (best probe eps = {best_eps}, robustness {best_robustness:.4e})")]
    Calibration {
        eps_min: f64,
        best_eps: f64,
        best_robustness: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
