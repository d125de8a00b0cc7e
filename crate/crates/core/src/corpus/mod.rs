//! Image, landmark and manifest ingestion plus the eye-aligned baseline.

mod eye;
mod image;
mod landmarks;
mod manifest;

use std::path::PathBuf;

use thiserror::Error;

pub use self::eye::{eye_align, eye_transform, EyeAligned, EyeTargets};
pub use self::image::{
    decode_image, encode_pgm, load_image, save_pgm, save_png, to_u8_pixels, GrayImage, Sample,
};
pub use self::landmarks::{
    format_landmarks, ibug68, load_landmarks, parse_landmarks, save_landmarks, LandmarkLayout,
    LandmarkSet, LANDMARK_COUNT,
};
pub(crate) use self::landmarks::parse_landmark_lines;
pub use self::manifest::{
    format_manifest, load_manifest, parse_manifest, FaceRecord, Manifest, MANIFEST_HEADER,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("expected {LANDMARK_COUNT} landmarks, found {0}")]
    WrongPointCount(usize),
    #[error("malformed landmark line {0}")]
    MalformedLine(usize),
    #[error("landmark {0} is not finite")]
    NonFiniteLandmark(usize),
    #[error("eye centers coincide")]
    DegenerateEyes,
    #[error("duplicate manifest record for image {0}")]
    DuplicateRecord(String),
    #[error("manifest has no records")]
    EmptyManifest,
    #[error("manifest header must be `subject_id,image_path,landmark_path,expression_tag`, got `{0}`")]
    BadHeader(String),
    #[error("record for {0} has an empty subject id")]
    EmptySubject(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("need at least two subjects, found {0}")]
    TooFewSubjects(usize),
    #[error("subject {0} has fewer than two records")]
    TooFewRecords(String),
}
