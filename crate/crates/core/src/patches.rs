//! Fixed random ensemble of square patches over the aligned grid.
//!
//! The layout is drawn once from a seeded generator and stored with the
//! model, so training and testing cut exactly the same windows.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::Grid;
use crate::warp::{AlignedFace, Channel};

pub const DEFAULT_PATCH_COUNT: usize = 80;
pub const DEFAULT_PATCH_SIZE: usize = 30;

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("patch size {size} does not fit a {w}x{h} grid")]
    PatchTooLarge { size: usize, w: usize, h: usize },
    #[error("patch count and size must be positive")]
    Empty,
    #[error("patch index {0} out of range ({1} patches)")]
    IndexOutOfRange(usize, usize),
    #[error("face grid {found:?} does not match layout grid {expected:?}")]
    GridMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("face has no {0} channel")]
    ChannelMissing(&'static str),
    #[error("malformed layout line {0}")]
    MalformedLayout(usize),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Top-left corner and side length of one square patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Patch {
    pub x0: usize,
    pub y0: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLayout {
    pub patches: Vec<Patch>,
    pub grid: (usize, usize),
    pub seed: u64,
}

impl PatchLayout {
    pub fn new(patches: Vec<Patch>, grid: (usize, usize), seed: u64) -> Result<Self, PatchError> {
        let (w, h) = grid;
        if patches.is_empty() {
            return Err(PatchError::Empty);
        }
        for p in &patches {
            if p.size == 0 {
                return Err(PatchError::Empty);
            }
            if p.x0 + p.size > w || p.y0 + p.size > h {
                return Err(PatchError::PatchTooLarge { size: p.size, w, h });
            }
        }
        Ok(Self { patches, grid, seed })
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Stable fingerprint of the text form.
    pub fn fingerprint(&self) -> u64 {
        crate::fsutil::fnv1a64(format_layout(self).as_bytes())
    }
}

/// `count` patches of side `size` with top-left corners drawn uniformly from
/// `[0, w−size] × [0, h−size]`. Duplicates and overlaps are allowed.
pub fn generate_layout(
    grid: (usize, usize),
    count: usize,
    size: usize,
    seed: u64,
) -> Result<PatchLayout, PatchError> {
    let (w, h) = grid;
    if count == 0 || size == 0 {
        return Err(PatchError::Empty);
    }
    if size > w.min(h) {
        return Err(PatchError::PatchTooLarge { size, w, h });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patches = (0..count)
        .map(|_| {
            let x0 = rng.random_range(0..=w - size);
            let y0 = rng.random_range(0..=h - size);
            Patch { x0, y0, size }
        })
        .collect();
    PatchLayout::new(patches, grid, seed)
}

/// A single patch as large as the grid allows: the whole-face configuration.
pub fn whole_face_layout(grid: (usize, usize), seed: u64) -> Result<PatchLayout, PatchError> {
    generate_layout(grid, 1, grid.0.min(grid.1), seed)
}

/// Per-patch feature vectors of the three channels (row-major windows).
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatures {
    pub patch_index: usize,
    pub f_i: Vec<f64>,
    pub f_dx: Vec<f64>,
    pub f_dy: Vec<f64>,
}

/// Row-major flattening of patch `p` over one channel of `face`. Masked
/// pixels contribute their stored value (zero).
pub fn extract_channel(
    face: &AlignedFace,
    layout: &PatchLayout,
    p: usize,
    channel: Channel,
) -> Result<Vec<f64>, PatchError> {
    let patch = *layout
        .patches
        .get(p)
        .ok_or(PatchError::IndexOutOfRange(p, layout.len()))?;
    if face.dims() != layout.grid {
        return Err(PatchError::GridMismatch {
            expected: layout.grid,
            found: face.dims(),
        });
    }
    let grid = face
        .channel(channel)
        .ok_or(PatchError::ChannelMissing(channel.name()))?;
    Ok(window(grid, patch))
}

fn window(grid: &Grid<f64>, patch: Patch) -> Vec<f64> {
    let mut out = Vec::with_capacity(patch.size * patch.size);
    for row in patch.y0..patch.y0 + patch.size {
        out.extend_from_slice(&grid.row(row)[patch.x0..patch.x0 + patch.size]);
    }
    out
}

pub fn extract_features(
    face: &AlignedFace,
    layout: &PatchLayout,
    p: usize,
) -> Result<PatchFeatures, PatchError> {
    Ok(PatchFeatures {
        patch_index: p,
        f_i: extract_channel(face, layout, p, Channel::Intensity)?,
        f_dx: extract_channel(face, layout, p, Channel::Dx)?,
        f_dy: extract_channel(face, layout, p, Channel::Dy)?,
    })
}

/// Text form: `grid <w> <h> <seed>` then one `x0 y0 size` line per patch.
pub fn format_layout(layout: &PatchLayout) -> String {
    let mut out = String::with_capacity(16 * (layout.len() + 1));
    writeln!(out, "grid {} {} {}", layout.grid.0, layout.grid.1, layout.seed).expect("String write");
    for p in &layout.patches {
        writeln!(out, "{} {} {}", p.x0, p.y0, p.size).expect("String write");
    }
    out
}

pub fn parse_layout(text: &str) -> Result<PatchLayout, PatchError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hidx, header) = lines.next().ok_or(PatchError::MalformedLayout(1))?;
    let hf: Vec<&str> = header.split_whitespace().collect();
    let (w, h, seed) = match hf.as_slice() {
        ["grid", w, h, s] => (w.parse().ok(), h.parse().ok(), s.parse().ok()),
        _ => (None, None, None),
    };
    let (Some(w), Some(h), Some(seed)) = (w, h, seed) else {
        return Err(PatchError::MalformedLayout(hidx + 1));
    };
    let mut patches = Vec::new();
    for (idx, line) in lines {
        let nums: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| PatchError::MalformedLayout(idx + 1)))
            .collect::<Result<_, _>>()?;
        let [x0, y0, size] = nums[..] else {
            return Err(PatchError::MalformedLayout(idx + 1));
        };
        patches.push(Patch { x0, y0, size });
    }
    PatchLayout::new(patches, (w, h), seed)
}

pub fn save_layout(path: impl AsRef<Path>, layout: &PatchLayout) -> Result<(), PatchError> {
    Ok(crate::fsutil::write_atomic(path.as_ref(), format_layout(layout).as_bytes())?)
}

pub fn load_layout(path: impl AsRef<Path>) -> Result<PatchLayout, PatchError> {
    parse_layout(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn face_from(intensity: Grid<f64>) -> AlignedFace {
        let (w, h) = intensity.dims();
        AlignedFace {
            mask: Grid::filled(w, h, true),
            xmap: None,
            ymap: None,
            dx: Some(Grid::filled(w, h, 1.0)),
            dy: Some(Grid::filled(w, h, 1.0)),
            intensity,
            clamped_samples: 0,
        }
    }

    #[test]
    fn default_layout_bounds() {
        let l = generate_layout((140, 120), 80, 30, 3).unwrap();
        assert_eq!(l.len(), 80);
        for p in &l.patches {
            assert!(p.x0 <= 110 && p.y0 <= 90);
            assert_eq!(p.size, 30);
        }
        assert_eq!(l, generate_layout((140, 120), 80, 30, 3).unwrap());
        assert_ne!(l, generate_layout((140, 120), 80, 30, 4).unwrap());
    }

    #[test]
    fn oversized_patch_rejected() {
        assert!(matches!(
            generate_layout((140, 120), 80, 200, 0),
            Err(PatchError::PatchTooLarge { .. })
        ));
        assert!(matches!(generate_layout((140, 120), 80, 121, 0), Err(PatchError::PatchTooLarge { .. })));
        assert!(generate_layout((140, 120), 1, 120, 0).is_ok());
    }

    #[test]
    fn whole_face_is_single_min_dim_patch() {
        let l = whole_face_layout((140, 120), 9).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.patches[0].size, 120);
        assert_eq!(l.patches[0].y0, 0);
    }

    #[test]
    fn row_major_window() {
        let g = Grid::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let layout = PatchLayout::new(vec![Patch { x0: 0, y0: 0, size: 2 }], (2, 2), 0).unwrap();
        let f = extract_features(&face_from(g), &layout, 0).unwrap();
        assert_eq!(f.f_i, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(f.f_dx, vec![1.0; 4]);
    }

    #[test]
    fn full_size_patch_length_and_errors() {
        let face = face_from(Grid::filled(140, 120, 0.5));
        let layout = generate_layout((140, 120), 5, 30, 1).unwrap();
        let f = extract_features(&face, &layout, 4).unwrap();
        assert_eq!(f.f_i.len(), 900);
        assert!(matches!(extract_features(&face, &layout, 5), Err(PatchError::IndexOutOfRange(5, 5))));
        let small = face_from(Grid::filled(100, 100, 0.5));
        assert!(matches!(extract_features(&small, &layout, 0), Err(PatchError::GridMismatch { .. })));
        let plain = AlignedFace::intensity_only(Grid::filled(140, 120, 0.5), Grid::filled(140, 120, true));
        assert!(extract_channel(&plain, &layout, 0, Channel::Intensity).is_ok());
        assert!(matches!(
            extract_channel(&plain, &layout, 0, Channel::Dy),
            Err(PatchError::ChannelMissing("dy"))
        ));
    }

    #[test]
    fn layout_text_round_trip() {
        let l = generate_layout((140, 120), 12, 20, 42).unwrap();
        let text = format_layout(&l);
        assert!(text.starts_with("grid 140 120 42\n"));
        assert_eq!(parse_layout(&text).unwrap(), l);
        assert_eq!(l.fingerprint(), parse_layout(&text).unwrap().fingerprint());
        assert!(matches!(parse_layout("grid 10 10 1\n1 2\n"), Err(PatchError::MalformedLayout(2))));
    }

    proptest! {
        #[test]
        fn flattening_is_bijective(w in 3usize..20, h in 3usize..20, size in 1usize..3, seed in 0u64..1000) {
            let g = Grid::from_fn(w, h, |r, c| (r * 1000 + c) as f64);
            let face = face_from(g.clone());
            let layout = generate_layout((w, h), 4, size, seed).unwrap();
            for p in 0..layout.len() {
                let v = extract_channel(&face, &layout, p, Channel::Intensity).unwrap();
                let patch = layout.patches[p];
                for (k, value) in v.iter().enumerate() {
                    let (r, c) = (patch.y0 + k / size, patch.x0 + k % size);
                    prop_assert_eq!(*value, g[(r, c)]);
                }
            }
        }
    }
}
