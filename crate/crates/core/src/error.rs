//! Error type shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown subclass id {id}: hierarchy has {count} subclasses")]
    UnknownSubclass { id: usize, count: usize },

    #[error("norm violation at row {row}: norm {norm} outside the declared-normalized band")]
    NormViolation { row: usize, norm: f64 },

    #[error("invalid argument `{name}`: {detail}")]
    InvalidArgument { name: &'static str, detail: String },

    #[error("non-finite value in {context}{}", index.map(|i| format!(" (sample {i})")).unwrap_or_default())]
    NonFinite {
        context: &'static str,
        index: Option<usize>,
    },

    #[error("class {class} has no samples: empty class")]
    EmptyClass { class: usize },

    #[error("degenerate centroid for class {class}: zero mean")]
    DegenerateCentroid { class: usize },

    #[error("K = 1 leaves no positives; inter-prototype term disabled")]
    NoPositives,

    #[error("subclass {class} has no siblings in its superclass: hierarchy loss positive set empty")]
    NoSiblings { class: usize },

    #[error("singular covariance: increase ridge")]
    SingularCovariance,

    #[error("representative set must span at least 2 distinct subclasses, found {found}")]
    TooFewClasses { found: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Diverged { epoch: usize, batch: usize },

    #[error("no qualifying pairs for {metric}")]
    NoPairs { metric: &'static str },

    #[error("inter-superclass angle undefined: inter undefined with a single superclass")]
    InterAngleUndefined,

    #[error("synthetic geometry rejection sampling exhausted: {detail}")]
    DegenerateGeneration { detail: String },

    #[error("empty cluster persisted after {attempts} reseeds: degenerate clustering")]
    DegenerateClustering { attempts: usize },

    #[error("risk tier {tier} missing from training data")]
    MissingTier { tier: &'static str },

    #[error("nSR undefined: no OOD samples (denominator 0)")]
    NoOodSamples,
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
