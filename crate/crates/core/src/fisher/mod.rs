//! Fisher linear discriminant subspaces, one per patch and channel.

mod model;
mod scatter;
mod subspace;

use thiserror::Error;

pub use self::model::{
    decode_model, encode_model, load_model, save_model, train_model, DiscriminativeModel,
    ModelError, Projector, Slot, TrainConfig,
};
pub use self::scatter::{scatter_matrices, LabeledSamples};
pub use self::subspace::{fit_subspace, project, DiscriminativeSubspace, Ridge};

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("{0} vectors but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("no samples or zero-dimensional samples")]
    Empty,
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("need at least two classes")]
    SingleClass,
    #[error("{samples} samples are too few for {classes} classes")]
    TooFewSamples { samples: usize, classes: usize },
    #[error("class means coincide; no discriminant direction")]
    ZeroDiscriminant,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("inconsistent subspace shapes")]
    ShapeMismatch,
}
