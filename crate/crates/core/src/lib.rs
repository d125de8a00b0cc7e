//! Pixel-level face alignment and patch-ensemble face verification.
//!
//! Faces are warped onto a reference landmark geometry with a
//! piecewise-affine map, so every pixel lands on the same facial location
//! across images. The warped intensity and the per-pixel stretch of the map
//! (`dx`, `dy`) are cut into a fixed random ensemble of square patches, each
//! patch/channel gets its own Fisher LDA subspace, and two faces are compared
//! by a weighted sum of per-patch cosine similarities.

pub mod corpus;
pub mod eval;
pub mod fisher;
pub mod fsutil;
pub mod geom;
pub mod grid;
pub mod matcher;
pub mod patches;
pub mod pipeline;
pub mod synthetic;
pub mod warp;

pub use corpus::{GrayImage, LandmarkSet};
pub use geom::Point2;
pub use grid::Grid;
pub use warp::{AlignedFace, Channel, ReferenceContour};
