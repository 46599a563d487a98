use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: descriptor has {found} values, expected {expected}")]
    DescriptorLength { line: usize, found: usize, expected: usize },

    #[error("line {line}: descriptor entry {index} is not finite")]
    NonFinite { line: usize, index: usize },

    #[error("line {line}: duplicate observation (wearer {wearer_id}, image {image_id}, face {face_index})")]
    DuplicateObservation {
        line: usize,
        wearer_id: String,
        image_id: String,
        face_index: u32,
    },

    #[error("line {line}: timestamp {timestamp} does not fall on day {day}")]
    DayMismatch {
        line: usize,
        timestamp: String,
        day: String,
    },

    #[error("coverage for wearer {wearer_id} on {day}: {reason}")]
    InvalidCoverage {
        wearer_id: String,
        day: String,
        reason: String,
    },

    #[error("missing coverage for wearer {wearer_id} on {day}")]
    MissingCoverage { wearer_id: String, day: String },

    #[error("unknown wearer id {0:?}")]
    UnknownWearer(String),

    #[error("observation {index} has a degenerate descriptor for metric {metric}")]
    DegenerateVector { index: usize, metric: String },

    #[error("pearson correlation is undefined for a constant vector")]
    UndefinedCorrelation,

    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distance matrix: {0}")]
    InvalidDistanceMatrix(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("observation {0} is not covered by the clustering")]
    MissingFromClustering(String),

    #[error("observation {0} has no ground-truth label")]
    MissingLabel(String),

    #[error("impossible schedule: {0}")]
    ImpossibleSchedule(String),

    #[error("cannot render an empty chart")]
    EmptyChart,

    #[error("cannot parse table: {0}")]
    TableParse(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
