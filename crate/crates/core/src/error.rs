use thiserror::Error;

use crate::rules::RuleKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("{rows}x{cols} matrix needs {} entries, got {len}", rows * cols)]
    ShapeData { rows: usize, cols: usize, len: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular value decomposition did not converge")]
    SvdFailure,

    #[error("cholesky factorization failed: matrix is not positive definite")]
    Factorization,

    #[error("solver diverged: non-finite iterate at iteration {0}")]
    Diverged(usize),

    #[error("solver did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("V₁ has no closed form at λ₀ = λ_max")]
    ReferenceAtLambdaMax,

    #[error("{rule} requires λ₀ < λ_max")]
    RequiresInteriorReference { rule: RuleKind },

    #[error("reference dual solution is infeasible: ‖XᵀC₀‖₂ = {norm} > 1")]
    InfeasibleReference { norm: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("pgm: {0}")]
    Pgm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
