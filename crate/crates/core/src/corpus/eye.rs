use crate::geom::{Point2, Similarity};
use crate::grid::Grid;

use super::{CorpusError, GrayImage, LandmarkSet};

/// Canvas and eye targets for the eye-aligned baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeTargets {
    pub eye_a: Point2,
    pub eye_b: Point2,
    pub width: usize,
    pub height: usize,
}

impl Default for EyeTargets {
    fn default() -> Self {
        Self {
            eye_a: Point2::new(35.0, 55.0),
            eye_b: Point2::new(85.0, 55.0),
            width: 140,
            height: 120,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EyeAligned {
    pub image: GrayImage,
    pub landmarks: LandmarkSet,
    /// Maps input pixel coordinates to canvas coordinates.
    pub transform: Similarity,
    /// Canvas pixels whose source sample fell inside the input image.
    pub mask: Grid<bool>,
}

/// The similarity that moves the landmark eye centers onto the targets.
pub fn eye_transform(lm: &LandmarkSet, targets: &EyeTargets) -> Result<Similarity, CorpusError> {
    let (a, b) = lm.eye_centers();
    if a.distance(b) <= 1e-9 {
        return Err(CorpusError::DegenerateEyes);
    }
    Similarity::from_point_pairs(a, b, targets.eye_a, targets.eye_b)
        .ok_or(CorpusError::DegenerateEyes)
}

/// Registers a face by its eyes: a similarity transform puts both eye
/// centers exactly on the targets, the image is bilinearly resampled onto
/// the canvas and the landmarks are carried along.
pub fn eye_align(
    img: &GrayImage,
    lm: &LandmarkSet,
    targets: &EyeTargets,
) -> Result<EyeAligned, CorpusError> {
    let transform = eye_transform(lm, targets)?;
    let inverse = transform.inverse().ok_or(CorpusError::DegenerateEyes)?;
    let (w, h) = (targets.width, targets.height);
    let mut mask = Grid::filled(w, h, false);
    let mut values = vec![0.0; w * h];
    for row in 0..h {
        for col in 0..w {
            let src = inverse.apply(Point2::new(col as f64, row as f64));
            if let Some(s) = img.sample_bilinear(src.x, src.y) {
                values[row * w + col] = s.value;
                mask[(row, col)] = true;
            }
        }
    }
    let image = GrayImage::new(w, h, values)?;
    let landmarks = if transform.is_identity(0.0) {
        lm.clone()
    } else {
        lm.map(|p| transform.apply(p))
    };
    Ok(EyeAligned {
        image,
        landmarks,
        transform,
        mask,
    })
}
