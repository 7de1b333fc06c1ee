use thiserror::Error;

use crate::metrics::MetricKind;

pub type Result<T> = std::result::Result<T, AuditError>;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("shadow set needs at least one member and one non-member record")]
    EmptyShadow,
    #[error("prediction set is empty")]
    EmptySet,
    #[error("metric {0} has no threshold; correctness is decided directly")]
    UnsupportedMetric(MetricKind),
    #[error("threshold table was learned for {table}, but {requested} was requested")]
    MetricMismatch {
        table: MetricKind,
        requested: MetricKind,
    },
    #[error("record {index} has unknown membership; evaluation needs member/non-member tags")]
    UnknownMembership { index: usize },
    #[error("length mismatch: {left} decisions vs {right} records")]
    LengthMismatch { left: usize, right: usize },
    #[error("class count mismatch: expected {expected}, found {found}")]
    ClassCountMismatch { expected: usize, found: usize },
    #[error("no member records to summarize")]
    NoMembers,
    #[error("all metric values are identical ({0}); histogram bins are degenerate")]
    DegenerateBins(f64),
    #[error("need at least two classes with both members and non-members, found {0}")]
    FewerThanTwoClasses(usize),
    #[error("early-stopping sweep has no snapshots")]
    EmptySweep,
    #[error("invalid record at row {row}: {reason}")]
    InvariantViolation { row: usize, reason: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl AuditError {
    /// Usage problems (bad arguments, wrong metric) versus problems with the data itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            AuditError::UnsupportedMetric(_)
                | AuditError::MetricMismatch { .. }
                | AuditError::InvalidConfig(_)
        )
    }
}
