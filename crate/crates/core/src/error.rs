use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cost matrix {rows}x{cols} expects {expected} values, got {actual}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },
    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("instance {rows}x{cols} exceeds the brute-force enumeration bound ({bound})")]
    EnumerationBound {
        rows: usize,
        cols: usize,
        bound: &'static str,
    },
    #[error("length mismatch: {what} has {actual} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("class_id {class_id} outside confidence vector of length {len}")]
    ClassOutOfRange { class_id: u32, len: usize },
    #[error("insufficient proposals: {gts} ground truths but only {proposals} proposals")]
    InsufficientProposals { gts: usize, proposals: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("class_id {0} is not in the configured class set")]
    UnknownClass(u32),
    #[error("duplicate image id {0:?}")]
    DuplicateImage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
