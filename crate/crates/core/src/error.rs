use thiserror::Error;

/// Errors raised by the numerical kernels, samplers and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    #[error("{func} did not converge after {iters} iterations")]
    Convergence { func: &'static str, iters: usize },

    #[error("quadrature failed in {func}: estimated error {err:e} above tolerance")]
    Quadrature { func: &'static str, err: f64 },

    #[error("moment of order {order} diverges (requires order < {bound})")]
    MomentDivergence { order: u32, bound: f64 },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient rows: need at least {need}, got {got}")]
    InsufficientRows { need: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("config error at `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("data error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<usize>, msg: String },

    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(func: &'static str, msg: impl Into<String>) -> Error {
    Error::Domain {
        func,
        msg: msg.into(),
    }
}

/// Fails with a domain error unless `x` is finite and strictly positive.
pub(crate) fn check_positive(func: &'static str, name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(domain(func, format!("{name} must be finite and > 0, got {x}")))
    }
}
