use alloc::string::String;
use core::fmt;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands (or an operand and a declared dimension) disagree in shape.
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// An index is out of range for the object it addresses.
    Index {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    /// A computation produced (or was handed) a NaN or infinity.
    NonFinite { context: String },
    /// Training produced a non-finite loss.
    Divergence {
        iteration: usize,
        phase: &'static str,
    },
    /// A dataset invariant does not hold.
    Dataset(DatasetError),
    /// Invalid hyperparameters or an unusable label space/setting.
    Config(String),
}

/// Violations of the dataset invariants.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetError {
    /// Feature rows and label count disagree.
    LabelCount { features: usize, labels: usize },
    /// A label refers to a class with no attribute row.
    MissingAttributes { class: usize, classes: usize },
    /// A class listed as both seen and unseen.
    SeenUnseenOverlap { class: usize },
    /// A class ID appears twice in the seen or unseen list.
    DuplicateClass { class: usize },
    /// A split index points past the end of the sample table.
    SplitIndex {
        split: &'static str,
        index: usize,
        samples: usize,
    },
    /// A sample's label is not allowed in the split that lists it.
    SplitViolation {
        split: &'static str,
        sample: usize,
        class: usize,
    },
    /// A sample index appears in more than one split (or twice in one).
    SplitOverlap { sample: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left, right }
    }
}

impl From<DatasetError> for Error {
    fn from(e: DatasetError) -> Self {
        Error::Dataset(e)
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, left, right } => write!(
                f,
                "shape mismatch in {op}: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::Index { what, index, bound } => {
                write!(f, "{what} index {index} out of range (bound {bound})")
            }
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::Divergence { iteration, phase } => write!(
                f,
                "training diverged: non-finite loss at iteration {iteration} ({phase} step)"
            ),
            Error::Dataset(e) => write!(f, "invalid dataset: {e}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
        }
    }
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::LabelCount { features, labels } => {
                write!(f, "{features} feature rows but {labels} labels")
            }
            DatasetError::MissingAttributes { class, classes } => write!(
                f,
                "class {class} has no attribute row (table has {classes} rows)"
            ),
            DatasetError::SeenUnseenOverlap { class } => {
                write!(f, "class {class} is listed as both seen and unseen")
            }
            DatasetError::DuplicateClass { class } => write!(f, "class {class} listed twice"),
            DatasetError::SplitIndex {
                split,
                index,
                samples,
            } => write!(
                f,
                "split {split} references sample {index} but only {samples} samples exist"
            ),
            DatasetError::SplitViolation {
                split,
                sample,
                class,
            } => write!(
                f,
                "split violation: sample {sample} in {split} has class {class}, which that split does not allow"
            ),
            DatasetError::SplitOverlap { sample } => {
                write!(f, "sample {sample} appears in more than one split position")
            }
        }
    }
}

impl core::error::Error for Error {}
impl core::error::Error for DatasetError {}
