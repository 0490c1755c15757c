use alloc::string::String;

/// Errors raised by the decomposition engine and its supporting routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (bad dimensions, invalid
    /// parameter values, unsorted grids, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Dimensions of two inputs do not agree.
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A conditional linear system has no unique solution because one
    /// coordinate carries no weight and no penalty coupling.
    #[error("singular system: {axis} {index} has zero total weight and no penalty contribution")]
    DegenerateIndex { axis: Axis, index: usize },

    /// A symmetric matrix expected to be positive definite is not.
    #[error("matrix not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),

    /// All observed residuals are exactly zero, so no scale can be estimated.
    #[error("degenerate residuals; fix sigma manually")]
    DegenerateResiduals,

    /// Every GCV score on the grid was non-finite.
    #[error("GCV degenerate on grid")]
    GcvDegenerate,

    /// A row or column contains no observed cell.
    #[error("{axis} {index} has no observed cells")]
    EmptyLine { axis: Axis, index: usize },

    /// The matrix has no energy to apportion.
    #[error("zero matrix")]
    ZeroMatrix,

    /// Negative value where the log transform needs a nonnegative one.
    #[error("negative value {value} at cell ({row}, {col})")]
    NegativeValue { row: usize, col: usize, value: f64 },

    /// A failure while extracting the `index`-th component (0-based).
    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

/// Which side of the matrix an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Axis {
    Row,
    Column,
}

impl core::fmt::Display for Axis {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Axis::Row => f.write_str("row"),
            Axis::Column => f.write_str("column"),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
