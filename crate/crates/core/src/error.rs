use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root finding failed: {0}")]
    Root(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("shooting bracket error: {0}")]
    Bracket(String),

    #[error("tail attachment failed: {0}")]
    Tail(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("operator assembly failed: {0}")]
    Assembly(String),

    #[error("spectral solve did not converge (residual {residual:e}): {message}")]
    Spectral { message: String, residual: f64 },

    #[error("linearized operator is nearly singular (lambda1 = {0:e}); branch fold suspected")]
    NearSingular(f64),

    #[error("quadrature tolerance not met: {0}")]
    Quadrature(String),

    #[error("sweep failed: {0}")]
    Sweep(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("comparison error: {0}")]
    Comparison(String),

    #[error("landscape error: {0}")]
    Landscape(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("regime error: {0}")]
    Regime(String),
}

pub type Result<T> = std::result::Result<T, Error>;
