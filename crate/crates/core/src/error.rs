use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("score out of range at plane {plane} index {index}")]
    ScoreOutOfRange { plane: usize, index: usize },
    #[error("non-finite score at plane {plane} index {index}")]
    NonFiniteScore { plane: usize, index: usize },
    #[error("invalid perimeter value {value} at index {index}")]
    InvalidPerimeterValue { index: usize, value: u8 },
    #[error("label {label} out of range for {num_classes} classes at index {index}")]
    LabelOutOfRange {
        index: usize,
        label: u8,
        num_classes: usize,
    },
    #[error("class id {0} has no palette entry")]
    MissingPaletteEntry(u8),
    #[error("class id {0} is reserved")]
    ReservedClassId(u8),
    #[error("duplicate class id {0}")]
    DuplicateClassId(u8),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("empty search grid")]
    EmptyGrid,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_same_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            left_w: a.0,
            left_h: a.1,
            right_w: b.0,
            right_h: b.1,
        })
    }
}
