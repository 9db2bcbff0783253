//! Canonical test set, accuracy, and the three training studies.

mod report;
mod stats;
mod studies;
mod testset;

use std::path::PathBuf;

use thiserror::Error;

use crate::learner::LearnerError;

pub use report::{read_studies_csv, write_comparisons_csv, write_curves_csv, write_studies_csv, StudyRow};
pub use stats::{compare, compare_named, mean, ranks, sd, se, spearman, Comparison};
pub use studies::{
    condition_result, run_study1, run_study2, run_study3, subsample, ConditionResult, CurvePoint,
    PreparedCorpus, StudyConfig, StudyContext, StudyReport, MIN_CONDITION_EVENTS,
};
pub use testset::{
    accuracy, duplicate_inputs, duplicates_of, image_hash, model_accuracy, render_test_set, Classifier,
    PreparedTestSet, TestImage, TestSet, ORIENTATION_JITTER_DEG, SCALE_JITTER, TEST_RADIUS_FRAC,
    VIEWS_PER_CATEGORY,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("paired comparison needs equal lengths, got {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("{0}")]
    Empty(String),
    #[error("requested {size} events but the {view} corpus has only {available}")]
    SizeExceedsCorpus {
        view: String,
        size: usize,
        available: usize,
    },
    #[error("condition {condition} has {n} events, fewer than {MIN_CONDITION_EVENTS}")]
    TooFewEvents { condition: String, n: usize },
    #[error("degenerate median split in {0}: one side is empty")]
    DegenerateSplit(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
