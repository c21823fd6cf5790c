use thiserror::Error;

use crate::bias::BiasError;
use crate::cd_engine::CdError;
use crate::corpus::CorpusError;
use crate::coverage::CoverageError;
use crate::regress::RegressError;
use crate::synth::SynthError;

/// Top-level error for pipeline orchestration.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Cd(#[from] CdError),
    #[error(transparent)]
    Bias(#[from] BiasError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
