//! Cross-validated verification experiments and ROC statistics.

mod experiment;
mod folds;
mod plot;
mod roc;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::fisher::ModelError;
use crate::matcher::MatchError;
use crate::patches::PatchError;
use crate::pipeline::PipelineError;
use crate::warp::WarpError;

pub use self::experiment::{
    prepare_faces, run_experiment, run_folds, Dataset, ExperimentConfig, ExperimentReport,
    ExperimentResult, Mode, ReportRow, VrOutcome,
};
pub use self::folds::{make_folds, make_subject_folds, Fold, FoldPlan};
pub use self::plot::roc_svg;
pub use self::roc::{auc, roc, roc_from_pairs, vr_at_far, RocCurve, RocPoint};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no genuine pairs")]
    NoGenuinePairs,
    #[error("no impostor pairs")]
    NoImpostorPairs,
    #[error("non-finite score {0}")]
    NonFiniteScore(f64),
    #[error("FAR target must lie in (0, 1], got {0}")]
    InvalidFarTarget(f64),
    #[error("FAR {target} is below the smallest achievable FAR {floor}")]
    FarUnreachable { target: f64, floor: f64 },
    #[error("need at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("pixel alignment needs a reference contour")]
    MissingReference,
    #[error("fold {index}")]
    Fold {
        index: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
