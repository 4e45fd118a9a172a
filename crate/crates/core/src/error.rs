use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dataset has {len} pairs, but the split needs more than {required}")]
    DatasetTooSmall { len: usize, required: usize },
    #[error("no source pairs to sample from")]
    EmptyPool,
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("no alignment steps to estimate costs from")]
    NoAlignmentSteps,
    #[error("symbol id {id} out of range for vocabulary of size {size}")]
    SymbolOutOfRange { id: usize, size: usize },
    #[error("label id {id} out of range for {size} labels")]
    LabelOutOfRange { id: usize, size: usize },
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("dropout probability {0} is outside [0, 1)")]
    InvalidDropout(f64),
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("task `{0}` has no training data")]
    EmptyTask(String),
    #[error("multi-task training needs at least one auxiliary task")]
    NoAuxiliaryTasks,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("unsupported benchmark cell: {0}")]
    UnsupportedCell(String),
    #[error("training size {size} exceeds the {available} available training pairs")]
    SizeExceedsPool { size: usize, available: usize },
}
