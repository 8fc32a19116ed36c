use thiserror::Error;

pub type Result<T> = std::result::Result<T, FracError>;

#[derive(Debug, Error)]
pub enum FracError {
    #[error("fractional order {0} outside the supported range [0, 1)")]
    InvalidOrder(f64),

    #[error("fractional integral of order 0 is the identity; use the samples directly")]
    ZeroOrderIntegral,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid memory window: {0}")]
    InvalidWindow(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("expansion order {requested} exceeds the derivative budget {available}")]
    DerivativeBudget { requested: usize, available: usize },

    #[error("model window ({c}, {d}) must strictly contain [{lo}, {hi}]")]
    WindowContainment { c: f64, d: f64, lo: f64, hi: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("boundary condition violated: {0}")]
    Boundary(String),

    #[error("lagrangian '{name}' failed the partial-derivative self-check: {detail}")]
    LagrangianCheck { name: String, detail: String },

    #[error("unknown lagrangian id '{0}'")]
    UnknownLagrangian(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FracError {
    /// True for errors caused by numeric parameters outside an operation's domain
    /// (as opposed to malformed input or I/O failures).
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            FracError::InvalidOrder(_)
                | FracError::ZeroOrderIntegral
                | FracError::InvalidGrid(_)
                | FracError::InvalidWindow(_)
                | FracError::GridMismatch(_)
                | FracError::DerivativeBudget { .. }
                | FracError::WindowContainment { .. }
                | FracError::NonFinite(_)
                | FracError::Boundary(_)
                | FracError::LagrangianCheck { .. }
        )
    }
}
