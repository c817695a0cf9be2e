use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by geometry, fitting, projection, metrics and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("vector norm {0:e} is too small to normalize")]
    ZeroVector(f64),

    #[error("vector is not orthogonal to its base point (|v.p| = {0:e})")]
    NotTangent(f64),

    #[error("point is antipodal to the base point (cosine {0})")]
    AntipodalPoint(f64),

    #[error("tangent vector norm {0} is not below pi")]
    TangentNormTooLarge(f64),

    #[error("intrinsic mean did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown class {0:?}")]
    UnknownClass(String),

    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),

    #[error("class {0:?} has no points")]
    EmptyClass(String),

    #[error("lambda must lie in [0, 1], got {0}")]
    LambdaOutOfRange(f64),

    #[error("sphere geometry requires a base point")]
    MissingBasePoint,

    #[error("k = {k} is out of range (allowed 1..={max})")]
    KTooLarge { k: usize, max: usize },

    #[error("k = {k} exceeds the theme rank bound {max} (number of theme points)")]
    KExceedsThemeRank { k: usize, max: usize },

    #[error("k = {k} exceeds the discriminant rank bound {max} (classes - 1)")]
    KExceedsFdaRank { k: usize, max: usize },

    #[error("summed scatter has usable rank {rank} < k = {k}")]
    RankDeficientSum { rank: usize, k: usize },

    #[error("within-class scatter is singular")]
    SingularWithinScatter,

    #[error("this operation needs exactly two classes, got {0}")]
    NotTwoClasses(usize),

    #[error("subspace geometry does not match the operation")]
    GeometryMismatch,

    #[error("subspaces do not share a base point")]
    BasePointMismatch,

    #[error("basis is not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },

    #[error("label index {index} out of range for {classes} classes")]
    LabelIndexOutOfRange { index: u32, classes: usize },

    #[error("invalid concentration {0}")]
    InvalidConcentration(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Broad category used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Io { .. } | BadMagic { .. } | CorruptHeader(_) | TruncatedPayload { .. } | LabelIndexOutOfRange { .. }
            | NotOrthonormal(_) => {
                ErrorKind::Io
            }
            AntipodalPoint(_) | TangentNormTooLarge(_) | NoConvergence(_) | RankDeficientSum { .. } | SingularWithinScatter
            | ZeroVector(_) | NotTangent(_) => ErrorKind::Numeric,
            _ => ErrorKind::Usage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Numeric,
    Usage,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
