use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("signal contains non-finite samples")]
    NonFinite,
    #[error("signals are not on the same grid")]
    GridMismatch,
    #[error("signal length {len} does not exceed stencil width {width}")]
    StencilTooWide { len: usize, width: usize },
    #[error("derivative order {order} exceeds the maximum of {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("delay {delay} s lies outside the grid span [0, {span}] s")]
    DelayOutOfSpan { delay: f64, span: f64 },
    #[error("basis has no columns")]
    EmptyBasis,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("noise covariance is degenerate: {0}")]
    DegenerateCovariance(String),
    #[error("filter vector is zero")]
    ZeroFilter,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case tag used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::NonFinite => "non_finite",
            Error::GridMismatch => "grid_mismatch",
            Error::StencilTooWide { .. } => "stencil_too_wide",
            Error::OrderTooHigh { .. } => "order_too_high",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DelayOutOfSpan { .. } => "delay_out_of_span",
            Error::EmptyBasis => "empty_basis",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DegenerateCovariance(_) => "degenerate_covariance",
            Error::ZeroFilter => "zero_filter",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
