//! Landmark-guided piecewise-affine warping onto a reference geometry.
//!
//! A face is pixel-aligned by triangulating the reference contour, mapping
//! every target-grid pixel through its reference triangle onto the matching
//! triangle of the face's own landmarks, and sampling the input image there.
//! The per-pixel source coordinates are kept (`xmap`, `ymap`) and their
//! predecessor differences (`dx`, `dy`) form the geometry channels.

mod affine;
mod container;
mod delaunay;
mod map;
mod reference;

use thiserror::Error;

use crate::corpus::CorpusError;

pub use self::affine::{affine_eval, affine_fit, AffineCoeffs};
pub use self::container::{
    decode_aligned_face, delta_png, encode_aligned_face, intensity_png, load_aligned_face,
    save_aligned_face,
};
pub use self::delaunay::{triangulate, Triangulation};
pub use self::map::{
    extract_geometry_maps, forward_coordinate_map, warp_to_grid, AlignedFace, Channel,
    CoordinateMap, Warper,
};
pub use self::reference::{
    compute_reference_contour, format_reference, load_reference, parse_reference,
    save_reference, ReferenceContour,
};

/// Triangles with area below this (px²) are treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-9;

/// Default target grid, `(width, height)`.
pub const DEFAULT_GRID: (usize, usize) = (140, 120);

#[derive(Debug, Error)]
pub enum WarpError {
    #[error("no landmark sets to average")]
    EmptyInput,
    #[error("reference point {index} at ({x}, {y}) lies outside the grid")]
    OutOfGrid { index: usize, x: f64, y: f64 },
    #[error("invalid grid {0}x{1}")]
    InvalidGrid(usize, usize),
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    AllCollinear,
    #[error("points {0} and {1} coincide")]
    DuplicatePoint(usize, usize),
    #[error("point {0} is not finite")]
    NonFinitePoint(usize),
    #[error("triangle area below tolerance")]
    DegenerateTriangle,
    #[error("triangulation failed: {0}")]
    TriangulationFailed(String),
    #[error("grid mismatch: expected {expected:?}, found {found:?}")]
    GridMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("source-coordinate maps are missing")]
    MapsMissing,
    #[error("reference file header (line {0}) must be `grid <w> <h> [sources]`")]
    BadReferenceHeader(usize),
    #[error("corrupt aligned-face container: {0}")]
    CorruptContainer(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
