//! Image + landmarks → aligned face, in either alignment mode.

use thiserror::Error;

use crate::corpus::{self, eye_align, eye_transform, CorpusError, EyeTargets, GrayImage, LandmarkSet, Manifest};
use crate::warp::{self, AlignedFace, ReferenceContour, WarpError, Warper};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error("record {record}")]
    Record {
        record: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("eye canvas {canvas:?} differs from reference grid {grid:?}")]
    CanvasMismatch {
        canvas: (usize, usize),
        grid: (usize, usize),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alignment {
    /// Eye registration followed by a piecewise-affine warp onto the
    /// reference contour; yields intensity and geometry channels.
    Pixel,
    /// Eye registration only; intensity channel only.
    Eye,
}

impl Alignment {
    pub fn code(self) -> u8 {
        match self {
            Alignment::Pixel => 0,
            Alignment::Eye => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Alignment::Pixel),
            1 => Some(Alignment::Eye),
            _ => None,
        }
    }
}

pub struct Preprocessor {
    targets: EyeTargets,
    warper: Option<Warper>,
}

impl Preprocessor {
    pub fn eye(targets: EyeTargets) -> Self {
        Self { targets, warper: None }
    }

    pub fn pixel(reference: ReferenceContour, targets: EyeTargets) -> Result<Self, PipelineError> {
        let grid = reference.grid();
        if (targets.width, targets.height) != grid {
            return Err(PipelineError::CanvasMismatch {
                canvas: (targets.width, targets.height),
                grid,
            });
        }
        Ok(Self {
            targets,
            warper: Some(Warper::new(reference)?),
        })
    }

    pub fn alignment(&self) -> Alignment {
        if self.warper.is_some() {
            Alignment::Pixel
        } else {
            Alignment::Eye
        }
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.targets.width, self.targets.height)
    }

    pub fn prepare(&self, img: &GrayImage, lm: &LandmarkSet) -> Result<AlignedFace, PipelineError> {
        let aligned = eye_align(img, lm, &self.targets)?;
        match &self.warper {
            None => Ok(AlignedFace::from_eye_aligned(&aligned)),
            Some(w) => {
                let face = w.warp(&aligned.image, &aligned.landmarks)?;
                Ok(warp::extract_geometry_maps(face)?)
            }
        }
    }

    /// Loads and prepares manifest record `idx`; errors name the record.
    pub fn prepare_record(&self, manifest: &Manifest, idx: usize) -> Result<AlignedFace, PipelineError> {
        let rec = &manifest.records[idx];
        let run = || -> Result<AlignedFace, PipelineError> {
            let img = corpus::load_image(manifest.resolve(&rec.image_path))?;
            let lm = corpus::load_landmarks(manifest.resolve(&rec.landmark_path))?;
            self.prepare(&img, &lm)
        };
        run().map_err(|e| PipelineError::Record {
            record: rec.display_id(),
            source: Box::new(e),
        })
    }
}

/// Landmarks carried into the eye-registered canvas, as used to build the
/// reference contour.
pub fn eye_registered_landmarks(lm: &LandmarkSet, targets: &EyeTargets) -> Result<LandmarkSet, CorpusError> {
    let t = eye_transform(lm, targets)?;
    Ok(lm.map(|p| t.apply(p)))
}

/// Reference contour from the records whose expression tag equals `tag`
/// (all records when `tag` is `None`).
pub fn reference_from_manifest(
    manifest: &Manifest,
    tag: Option<&str>,
    targets: &EyeTargets,
) -> Result<ReferenceContour, PipelineError> {
    let mut sets = Vec::new();
    for rec in &manifest.records {
        if tag.is_some_and(|t| rec.expression_tag.as_deref() != Some(t)) {
            continue;
        }
        let lm = corpus::load_landmarks(manifest.resolve(&rec.landmark_path))?;
        sets.push(eye_registered_landmarks(&lm, targets)?);
    }
    Ok(warp::compute_reference_contour(&sets, (targets.width, targets.height))?)
}
