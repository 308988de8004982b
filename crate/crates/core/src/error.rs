use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped by the exit code the CLI maps them to: configuration
/// problems, data problems, and training problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error in {path}: {msg}")]
    Ingestion { path: String, msg: String },

    #[error("imputation error: column '{column}' has no observed values")]
    Imputation { column: String },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("partition error: link references unassigned drug '{0}'")]
    Partition(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("sampling error: requested {requested} negatives but only {available} non-edges exist (deficit {deficit})")]
    Sampling {
        requested: usize,
        available: usize,
        deficit: usize,
    },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite gradient in parameter slot {slot}")]
    NonFiniteGradient { slot: usize },

    #[error("training error in {stage} at epoch {epoch}: {msg}")]
    Training {
        stage: &'static str,
        epoch: usize,
        msg: String,
    },

    #[error("clustering error: {0}")]
    Clustering(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("stage '{stage}'{}: {source}", cluster.map(|c| format!(" (cluster {c})")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        cluster: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn training(stage: &'static str, epoch: usize, msg: impl Into<String>) -> Self {
        Error::Training {
            stage,
            epoch,
            msg: msg.into(),
        }
    }

    /// Wraps an error with the pipeline stage (and cluster) it came from.
    pub fn in_stage(self, stage: &'static str, cluster: Option<usize>) -> Self {
        Error::Stage {
            stage,
            cluster,
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 config, 3 data, 4 training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) | Error::Validation(_) | Error::Dimension(_) => 2,
            Error::NonFiniteGradient { .. } | Error::Training { .. } | Error::Clustering(_) => 4,
            _ => 3,
        }
    }
}
