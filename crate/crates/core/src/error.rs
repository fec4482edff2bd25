use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular (sigma_min / sigma_max = {ratio:.3e})")]
    SingularMatrix { ratio: f64 },

    #[error("cannot build an isometry with {cols} columns in dimension {rows}")]
    DimensionTooSmall { rows: usize, cols: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown variable x{index} (declared d = {d}) at byte {offset}")]
    UnknownVariable { index: usize, d: usize, offset: usize },

    #[error("expression contains inv(...) and is not a polynomial")]
    NotPolynomial,

    #[error("singular inversion at node {path}")]
    SingularityHit { path: String },

    #[error("point is outside the domain (||delta(x)|| = {norm:.6})")]
    OutsideDomain { norm: f64 },

    #[error("Gram matrices disagree by {deviation:.3e}")]
    GramMismatch { deviation: f64 },

    #[error("required multiplicity {needed} exceeds cap {cap}")]
    RankOverflow { needed: usize, cap: usize },

    #[error("Psi*Psi - eps^2 has eigenvalue {min_eig:.3e} at sample {index}")]
    BelowFloor { index: usize, min_eig: f64 },

    #[error("no candidate covers the sample set (best r = {best:.6})")]
    NoCover { best: f64 },

    #[error("expansion exceeds {cap} terms")]
    TermBlowup { cap: usize },

    #[error("phi(M) is not invertible (sigma_min / sigma_max = {ratio:.3e})")]
    NotInvertible { ratio: f64 },

    #[error("root finding failed: {0}")]
    RootFindingFailure(String),

    #[error("internal numerical failure: {0}")]
    Internal(String),
}
