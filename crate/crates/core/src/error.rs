use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("id {id} out of range for {n} points")]
    IdOutOfRange { id: usize, n: usize },
    #[error("cannot build a permutation of zero elements")]
    EmptyPermutation,
    #[error("family is not sensitive: p1 = {p1}, p2 = {p2}")]
    NotSensitive { p1: f64, p2: f64 },
    #[error("{family} hashing does not fit the {metric} metric")]
    IncompatibleFamily { family: &'static str, metric: &'static str },
    #[error("sketches were built with different parameters")]
    SketchMismatch,
    #[error("sketch universe {n} is too large (n^3 must stay below 2^61 - 1)")]
    UniverseTooLarge { n: u64 },
    #[error("segment {h} out of range for {k} segments")]
    SegmentOutOfRange { h: usize, k: usize },
    #[error("point is not unit norm (norm {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty expected support")]
    EmptySupport,
    #[error("observed outcome {0} has zero expected probability")]
    UnexpectedOutcome(u32),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
