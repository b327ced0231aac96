use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("total mass {mass} exceeds 1")]
    MassOverflow { mass: f64 },

    #[error("grid too small: {lost:.3e} of the requested mass falls outside")]
    GridTooSmall { lost: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grids are not aligned: {0}")]
    GridMismatch(String),

    #[error("singular kernel: Coulomb smoothing must be positive")]
    SingularKernel,

    #[error("localization supports overlap: centers {i} and {j} are closer than 4 r_n")]
    OverlapError { i: usize, j: usize },

    #[error("no admissible shift tuple satisfies the separation constraint")]
    EmptyAdmissibleSet,

    #[error("operation requires d = 3, got d = {0}")]
    DimensionError(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
