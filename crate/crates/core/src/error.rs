use thiserror::Error;

use crate::forward::KktResiduals;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain where the operation is defined.
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain { what: String, value: f64, lo: f64, hi: f64 },

    #[error("mesh quality: {0}")]
    MeshQuality(String),

    #[error("mesh topology changed between design perturbations: {0}")]
    TopologyChanged(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// Linearly dependent active constraint rows (LICQ failure).
    #[error("active constraint rows are rank deficient (pivot {pivot})")]
    RankDeficient { pivot: usize },

    #[error("assembly: {0}")]
    Assembly(String),

    #[error("degenerate contact segment {0} (zero length)")]
    DegenerateSegment(usize),

    #[error("forward solver stopped after {iterations} iterations without convergence ({residuals})")]
    NonConvergence { iterations: usize, residuals: KktResiduals },

    /// Constraints with both a vanishing multiplier and a vanishing gap; the
    /// solution map is not differentiable there.
    #[error("weak complementarity at constraints {0:?}")]
    Degenerate(Vec<usize>),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension(format!("{what}: expected {expected}, found {found}")));
    }
    Ok(())
}
