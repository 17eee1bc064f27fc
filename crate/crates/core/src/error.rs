use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("topology error: {0}")]
    Topology(String),
    #[error("incompatible fields: {0}")]
    Mismatch(String),
    #[error("bidegree out of range: {0}")]
    Bidegree(String),
    #[error("solver did not converge: {what} (residual {residual:e} after {iterations} iterations)")]
    NoConvergence {
        what: String,
        residual: f64,
        iterations: usize,
    },
    #[error("positivity lost: {0}")]
    Positivity(String),
    #[error("spectrum gap violated: eigenvalue {eigenvalue} within {band} of 1")]
    SpectrumGap { eigenvalue: f64, band: f64 },
    #[error("insufficient stencil: {0}")]
    Stencil(String),
    #[error("estimate inapplicable at degenerate order {0}")]
    Degenerate(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
