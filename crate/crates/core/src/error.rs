//! Crate-wide error type.

use alloc::string::String;

/// Errors produced by the codec, mask generators, triggers, and analyses.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("expected {expected} channels, got {got}")]
    ChannelCount { expected: usize, got: usize },
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("image {0}x{1} is smaller than the {2}x{2} window")]
    ImageTooSmall(usize, usize, usize),
    #[error("dimensions must be powers of two, got {0}x{1}")]
    NotPowerOfTwo(usize, usize),
    #[error("non-finite value in input map")]
    NonFinite,
    #[error("high-pass threshold must lie in (0,1), got {0}")]
    InvalidThreshold(f64),
    #[error("quality must lie in 1..=100, got {0}")]
    InvalidQuality(u32),
    #[error("mask entry {0} outside [0,1]")]
    MaskRange(f64),
    #[error("frequency position ({0},{1}) outside spectrum bounds")]
    PositionOutOfBounds(usize, usize),
    #[error("patch does not fit inside the image")]
    PatchTooLarge,
    #[error("truncated JPEG stream")]
    Truncated,
    #[error("unsupported JPEG feature: {0}")]
    Unsupported(&'static str),
    #[error("malformed JPEG stream: {0}")]
    Malformed(&'static str),
    #[error("empty poisoned pool: the benign pairing rule needs at least one poisoned sample")]
    EmptyPool,
    #[error("empty dataset or corpus")]
    EmptyInput,
    #[error("mask is not binary at block granularity (block mean {0})")]
    NonBinaryMask(f64),
    #[error("both mask regions carry zero spectral energy")]
    ZeroEnergy,
    #[error("probe needs at least two classes, got {0}")]
    DegenerateClasses(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
