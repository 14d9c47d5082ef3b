use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),

    /// No empty slot and no absorbable tombstone on the insertion path.
    #[error("filter capacity exhausted")]
    CapacityExhausted,

    #[error("fingerprint not present in its bucket's run")]
    NotFound,

    #[error("structural corruption at slot {slot}: {reason}")]
    StructuralCorruption { slot: usize, reason: String },
}

impl FilterError {
    pub(crate) fn corrupt(slot: usize, reason: impl Into<String>) -> Self {
        FilterError::StructuralCorruption {
            slot,
            reason: reason.into(),
        }
    }
}
