use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use crate::corpus::{self, format_landmarks, CorpusError, LandmarkSet, LANDMARK_COUNT};
use crate::geom::Point2;

use super::WarpError;

/// Target geometry every face is warped onto: the mean of several neutral,
/// eye-registered landmark sets, expressed on the target grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceContour {
    landmarks: LandmarkSet,
    grid: (usize, usize),
    source_count: usize,
}

impl ReferenceContour {
    /// Wraps a landmark set as a reference, checking it fits the grid.
    pub fn new(landmarks: LandmarkSet, grid: (usize, usize), source_count: usize) -> Result<Self, WarpError> {
        let (w, h) = grid;
        if w == 0 || h == 0 {
            return Err(WarpError::InvalidGrid(w, h));
        }
        let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
        if let Some((k, p)) = landmarks
            .points()
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.x >= 0.0 && p.x <= max_x && p.y >= 0.0 && p.y <= max_y))
        {
            return Err(WarpError::OutOfGrid { index: k, x: p.x, y: p.y });
        }
        Ok(Self {
            landmarks,
            grid,
            source_count,
        })
    }

    pub fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }

    pub fn points(&self) -> &[Point2] {
        self.landmarks.points()
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }
}

/// Point-wise mean of landmark sets already registered onto the grid.
pub fn compute_reference_contour(
    neutral: &[LandmarkSet],
    grid: (usize, usize),
) -> Result<ReferenceContour, WarpError> {
    if neutral.is_empty() {
        return Err(WarpError::EmptyInput);
    }
    let n = neutral.len() as f64;
    let points = (0..LANDMARK_COUNT)
        .map(|k| {
            let (sx, sy) = neutral
                .iter()
                .map(|lm| lm.points()[k])
                .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
            Point2::new(sx / n, sy / n)
        })
        .collect();
    let landmarks = LandmarkSet::new(points).map_err(WarpError::Corpus)?;
    ReferenceContour::new(landmarks, grid, neutral.len())
}

/// Text form: a `grid <w> <h> <sources>` line followed by 68 `x y` lines.
pub fn format_reference(r: &ReferenceContour) -> String {
    let mut out = String::new();
    writeln!(out, "grid {} {} {}", r.grid.0, r.grid.1, r.source_count).expect("String write");
    out.push_str(&format_landmarks(&r.landmarks));
    out
}

pub fn parse_reference(text: &str) -> Result<ReferenceContour, WarpError> {
    let mut lines = text.lines().enumerate().skip_while(|(_, l)| l.trim().is_empty());
    let (idx, header) = lines.next().ok_or(WarpError::BadReferenceHeader(0))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse = |s: &str| s.parse::<usize>().ok();
    let (w, h, n) = match fields.as_slice() {
        ["grid", w, h] => (parse(w), parse(h), Some(0)),
        ["grid", w, h, n] => (parse(w), parse(h), parse(n)),
        _ => (None, None, None),
    };
    let (Some(w), Some(h), Some(n)) = (w, h, n) else {
        return Err(WarpError::BadReferenceHeader(idx + 1));
    };
    let landmarks = corpus::parse_landmark_lines(lines).map_err(WarpError::Corpus)?;
    ReferenceContour::new(landmarks, (w, h), n)
}

pub fn load_reference(path: impl AsRef<Path>) -> Result<ReferenceContour, WarpError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| {
        WarpError::Corpus(match e.kind() {
            ErrorKind::NotFound => CorpusError::FileNotFound(path.to_path_buf()),
            _ => CorpusError::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })
    })?;
    parse_reference(&text)
}

pub fn save_reference(path: impl AsRef<Path>, r: &ReferenceContour) -> Result<(), WarpError> {
    let path = path.as_ref();
    crate::fsutil::write_atomic(path, format_reference(r).as_bytes()).map_err(|source| {
        WarpError::Corpus(CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}
