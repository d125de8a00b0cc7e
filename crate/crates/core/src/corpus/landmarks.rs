use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::ops::Range;
use std::path::Path;

use crate::geom::{orient2d, Point2};

use super::CorpusError;

/// Number of points in the supported landmark convention.
pub const LANDMARK_COUNT: usize = 68;

/// Index ranges of the 68-point (iBUG / Multi-PIE) markup.
pub mod ibug68 {
    use std::ops::Range;

    pub const OUTLINE: Range<usize> = 0..17;
    pub const BROW_A: Range<usize> = 17..22;
    pub const BROW_B: Range<usize> = 22..27;
    pub const NOSE: Range<usize> = 27..36;
    /// The eye that appears on the image's left side (smaller x).
    pub const EYE_A: Range<usize> = 36..42;
    /// The eye that appears on the image's right side.
    pub const EYE_B: Range<usize> = 42..48;
    pub const MOUTH_OUTER: Range<usize> = 48..60;
    pub const MOUTH_INNER: Range<usize> = 60..68;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LandmarkLayout {
    #[default]
    Ibug68,
}

/// An ordered set of 68 facial landmarks in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point2>,
    layout: LandmarkLayout,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point2>) -> Result<Self, CorpusError> {
        if points.len() != LANDMARK_COUNT {
            return Err(CorpusError::WrongPointCount(points.len()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(CorpusError::NonFiniteLandmark(i));
        }
        Ok(Self {
            points,
            layout: LandmarkLayout::Ibug68,
        })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn layout(&self) -> LandmarkLayout {
        self.layout
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> LandmarkSet {
        LandmarkSet {
            points: self.points.iter().map(|p| f(*p)).collect(),
            layout: self.layout,
        }
    }

    fn group_centroid(&self, range: Range<usize>) -> Point2 {
        Point2::centroid(&self.points[range])
    }

    /// Centers of the two eyes (mean of each eye's six landmarks), ordered
    /// as `(EYE_A, EYE_B)`.
    pub fn eye_centers(&self) -> (Point2, Point2) {
        (
            self.group_centroid(ibug68::EYE_A),
            self.group_centroid(ibug68::EYE_B),
        )
    }

    /// Whether the closed outline polygon (points 0..=16) is simple: no two
    /// non-adjacent edges intersect and no edge is degenerate.
    pub fn outline_is_simple(&self) -> bool {
        let poly = &self.points[ibug68::OUTLINE];
        let n = poly.len();
        let edge = |i: usize| (poly[i], poly[(i + 1) % n]);
        for i in 0..n {
            let (a, b) = edge(i);
            if a == b {
                return false;
            }
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    // adjacent edges share a vertex; reject only if they fold back
                    let (c, d) = edge(j);
                    if orient2d(a, b, d) == 0.0 && orient2d(a, b, c) == 0.0 {
                        let (u, v) = (b - a, d - c);
                        if u.x * v.x + u.y * v.y < 0.0 {
                            return false;
                        }
                    }
                    continue;
                }
                let (c, d) = edge(j);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient2d(c, d, a);
    let d2 = orient2d(c, d, b);
    let d3 = orient2d(a, b, c);
    let d4 = orient2d(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point2, q: Point2, r: Point2| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (d1 == 0.0 && on(c, d, a))
        || (d2 == 0.0 && on(c, d, b))
        || (d3 == 0.0 && on(a, b, c))
        || (d4 == 0.0 && on(a, b, d))
}

/// Loads a landmark file: one `x y` pair per line. `.pts`-style header
/// lines (`version:`, `n_points:`, braces), blank lines and `#` comments are
/// skipped.
pub fn load_landmarks(path: impl AsRef<Path>) -> Result<LandmarkSet, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CorpusError::FileNotFound(path.to_path_buf()),
        _ => CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    parse_landmarks(&text)
}

pub fn parse_landmarks(text: &str) -> Result<LandmarkSet, CorpusError> {
    parse_landmark_lines(text.lines().enumerate())
}

pub(crate) fn parse_landmark_lines<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
) -> Result<LandmarkSet, CorpusError> {
    let mut points = Vec::with_capacity(LANDMARK_COUNT);
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || is_pts_header(line) {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |s: Option<&str>| s.and_then(|t| t.parse::<f64>().ok());
        let x = parse(parts.next());
        let y = parse(parts.next());
        match (x, y, parts.next()) {
            (Some(x), Some(y), None) if x.is_finite() && y.is_finite() => {
                points.push(Point2::new(x, y))
            }
            _ => return Err(CorpusError::MalformedLine(idx + 1)),
        }
    }
    LandmarkSet::new(points)
}

fn is_pts_header(line: &str) -> bool {
    line == "{"
        || line == "}"
        || line.starts_with("version:")
        || line.starts_with("n_points:")
}

pub fn format_landmarks(lm: &LandmarkSet) -> String {
    let mut out = String::with_capacity(LANDMARK_COUNT * 24);
    for p in lm.points() {
        // `{}` on f64 prints the shortest string that round-trips exactly
        writeln!(out, "{} {}", p.x, p.y).expect("writing to String");
    }
    out
}

pub fn save_landmarks(path: impl AsRef<Path>, lm: &LandmarkSet) -> Result<(), CorpusError> {
    let path = path.as_ref();
    crate::fsutil::write_atomic(path, format_landmarks(lm).as_bytes()).map_err(|source| {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}
