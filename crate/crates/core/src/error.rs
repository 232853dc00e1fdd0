use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A sample or model with zero bins.
    NoBins,
    /// Per-bin arrays of different lengths.
    LengthMismatch {
        expected: usize,
        found: usize,
    },
    /// Negative or non-finite entry.
    InvalidValue {
        what: &'static str,
        index: usize,
        value: f64,
    },
    /// Bin with zero sum of weights but nonzero sum of squared weights.
    InconsistentBin {
        index: usize,
    },
    /// Bin edges are not finite and strictly increasing.
    EdgesNotIncreasing {
        index: usize,
    },
    NoComponents,
    /// A template with zero total content.
    EmptyTemplate {
        component: usize,
    },
    /// The exact likelihood has no weighted form.
    WeightedExact,
    /// Objective is not finite at the starting point.
    NonFiniteStart,
    /// Starting point lies below a lower bound.
    StartOutOfBounds {
        index: usize,
    },
    /// Parameter vector of the wrong dimension.
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// Goodness of fit requested with ndof <= 0.
    NoDegreesOfFreedom {
        ndof: i64,
    },
    /// Invalid toy configuration.
    InvalidConfig(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NoBins => write!(f, "sample has zero bins"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "bin count mismatch: expected {expected}, found {found}")
            }
            Error::InvalidValue { what, index, value } => {
                write!(f, "{what}[{index}] = {value} is negative or not finite")
            }
            Error::InconsistentBin { index } => {
                write!(f, "bin {index} has sumw = 0 but sumw2 > 0")
            }
            Error::EdgesNotIncreasing { index } => {
                write!(
                    f,
                    "bin edges must be finite and strictly increasing (at edge {index})"
                )
            }
            Error::NoComponents => write!(f, "model needs at least one template"),
            Error::EmptyTemplate { component } => {
                write!(f, "template {component} has zero total content")
            }
            Error::WeightedExact => {
                write!(f, "the exact likelihood does not support weighted samples")
            }
            Error::NonFiniteStart => write!(f, "cost is not finite at the starting point"),
            Error::StartOutOfBounds { index } => {
                write!(f, "start parameter {index} is below its lower bound")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "expected {expected} parameters, found {found}")
            }
            Error::NoDegreesOfFreedom { ndof } => {
                write!(f, "goodness of fit undefined for ndof = {ndof}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid toy configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
