use std::path::PathBuf;

use thiserror::Error;

use crate::ClassId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible simplex: {n_classes} classes need at least {} dimensions, got {dim}", n_classes - 1)]
    InfeasibleSimplex { n_classes: usize, dim: usize },

    #[error("invalid centroid set: {0}")]
    InvalidCentroids(String),

    #[error("dimension mismatch ({what}): expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate feature: norm {norm:e} is too small to normalize")]
    DegenerateFeature { norm: f64 },

    #[error("contract error: {0}")]
    Contract(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("class labels are not disjoint: class {label} already belongs to member {member}")]
    NotDisjoint { label: ClassId, member: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown label {0}: no ensemble member was trained on it")]
    UnknownLabel(ClassId),

    #[error("split error: {0}")]
    Split(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("missing file {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("unsupported format version {found} in {} (supported: {supported})", path.display())]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("corrupted payload in {}: {reason}", path.display())]
    CorruptedPayload { path: PathBuf, reason: String },

    #[error("manifest member count mismatch: manifest says {declared}, lists {listed}")]
    MemberCountMismatch { declared: usize, listed: usize },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse grouping used by the command-line driver to pick an exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::InfeasibleSimplex { .. } => {
                ErrorCategory::Usage
            }
            Error::DegenerateFeature { .. } | Error::TrainingDiverged { .. } => {
                ErrorCategory::Numeric
            }
            _ => ErrorCategory::Data,
        }
    }

    /// Wraps an I/O failure on `path`; a missing file gets its own variant.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::Io { path, source }
        }
    }
}
