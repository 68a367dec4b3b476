use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series failed to converge within {max_terms} terms (last term {last_term:e})")]
    NonConvergence { max_terms: usize, last_term: f64 },

    #[error("Cholesky factorization failed after jitter escalation up to {max_jitter:e} (matrix dim {dim})")]
    Factorization { dim: usize, max_jitter: f64 },

    #[error("exponent overflow ({exponent}) in replica {replica}")]
    Overflow { exponent: f64, replica: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("optimizer failed to reach feasibility: best residual {best_residual:e} over {starts} starts")]
    Infeasible { best_residual: f64, starts: usize },

    #[error("insufficient hits on ladder rungs {rungs:?} (minimum required {min_hits})")]
    InsufficientHits { rungs: Vec<f64>, min_hits: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
