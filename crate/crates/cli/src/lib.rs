//! Pipeline behind the `egoword` binary: corpus synthesis, training runs,
//! the three studies, and the acceptance checks evaluated on their outputs.

pub mod checks;
pub mod config;
pub mod pipeline;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use checks::{Check, CHANCE};
pub use config::{CorpusConfig, RunConfig};
pub use pipeline::{OutputLayout, RunSummary, Stage};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing artifact {0} (run the stage that produces it first)")]
    MissingArtifact(PathBuf),
    #[error("artifact {path} is inconsistent: {reason}")]
    Inconsistent { path: PathBuf, reason: String },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CliError>,
    },
    #[error(transparent)]
    Session(#[from] egoword::scene::SessionError),
    #[error(transparent)]
    Export(#[from] egoword::scene::ExportError),
    #[error(transparent)]
    Events(#[from] egoword::events::EventsError),
    #[error(transparent)]
    Learner(#[from] egoword::learner::LearnerError),
    #[error(transparent)]
    Eval(#[from] egoword::evalx::EvalError),
    #[error(transparent)]
    Acuity(#[from] egoword::acuity::AcuityError),
    #[error(transparent)]
    Image(#[from] egoword::image::ImageError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
