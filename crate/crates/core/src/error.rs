use thiserror::Error;

/// Errors produced by validation and evaluation across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    #[error("variable groups overlap on axis `{0}`")]
    OverlappingGroups(String),

    #[error("empty variable group where a non-empty one is required")]
    EmptyGroup,

    #[error("table would hold {cells} cells, exceeding the {limit}-cell budget")]
    CellBudget { cells: u128, limit: u64 },

    #[error("state symmetry violated at (y={y}, x={x}, s={s}): {detail}")]
    SymmetryViolation {
        y: usize,
        x: usize,
        s: usize,
        detail: String,
    },

    #[error("channel is not deterministic per state, which this operation requires")]
    NotDeterministic,

    #[error("channel has no valid state symmetry witness: {0}")]
    NotSymmetric(String),

    #[error("auxiliary scheme is not symmetric ({0}); symmetrize it first")]
    AsymmetricAux(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("|U| = {got} exceeds the cardinality bound {bound}")]
    CardinalityExceeded { got: usize, bound: usize },

    #[error("channel file: {0}")]
    ChannelFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
