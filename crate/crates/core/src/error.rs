use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A coordinate or parameter was NaN or infinite.
    NonFinite(&'static str),
    /// An input collection that must be non-empty was empty.
    Empty(&'static str),
    LandmarkCountMismatch { expected: usize, found: usize },
    TooFewLandmarks { needed: usize, found: usize },
    IndexOutOfRange { index: usize, len: usize },
    LengthMismatch { what: &'static str, left: usize, right: usize },
    InvalidBox,
    /// Points are (nearly) coincident, so no transform can be fitted.
    DegenerateShape,
    /// The 3D model points are coplanar or otherwise ill-conditioned.
    DegenerateModel,
    NotOrthonormal,
    ZeroNormalizer,
    InfeasibleBudget { budget: u64, min_total: u64, max_total: u64 },
    ImageTooSmall { size: u32, min: u32 },
    InvalidConfig(String),
    /// A numerical invariant failed during training or estimation.
    Numeric(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::Empty(what) => write!(f, "{what} must not be empty"),
            Error::LandmarkCountMismatch { expected, found } => {
                write!(f, "landmark count mismatch: expected {expected}, found {found}")
            }
            Error::TooFewLandmarks { needed, found } => {
                write!(f, "need at least {needed} landmarks, found {found}")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::LengthMismatch { what, left, right } => {
                write!(f, "{what}: lengths differ ({left} vs {right})")
            }
            Error::InvalidBox => f.write_str("bounding box must have finite position and positive size"),
            Error::DegenerateShape => f.write_str("degenerate shape: points are coincident"),
            Error::DegenerateModel => f.write_str("degenerate 3D model: points are coplanar"),
            Error::NotOrthonormal => f.write_str("matrix is not orthonormal"),
            Error::ZeroNormalizer => f.write_str("error normalizer is zero"),
            Error::InfeasibleBudget { budget, min_total, max_total } => write!(
                f,
                "augmentation budget {budget} outside feasible range [{min_total}, {max_total}]"
            ),
            Error::ImageTooSmall { size, min } => {
                write!(f, "image size {size} too small, need at least {min}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
