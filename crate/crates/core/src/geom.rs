//! Planar points, predicates and similarity transforms.

use std::ops::{Add, Mul, Sub};

/// A point in pixel coordinates: `x` runs along columns, `y` along rows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(&self, other: Point2) -> f64 {
        (*self - other).norm()
    }

    pub fn centroid(points: &[Point2]) -> Point2 {
        let n = points.len() as f64;
        let sum = points.iter().fold(Point2::default(), |acc, p| acc + *p);
        Point2::new(sum.x / n, sum.y / n)
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise
/// in a y-up frame.
#[inline]
pub fn orient2d(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Unsigned triangle area.
#[inline]
pub fn triangle_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * orient2d(a, b, c).abs()
}

/// In-circle determinant for a positively oriented triangle `(a, b, c)`:
/// positive when `d` lies strictly inside the circumcircle.
///
/// Also returns a magnitude bound on the terms, used to scale tolerances.
pub fn incircle(a: Point2, b: Point2, c: Point2, d: Point2) -> (f64, f64) {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    let bc = bdx * cdy - bdy * cdx;
    let ca = cdx * ady - cdy * adx;
    let ab = adx * bdy - ady * bdx;
    let det = alift * bc + blift * ca + clift * ab;
    let mag = alift * ((bdx * cdy).abs() + (bdy * cdx).abs())
        + blift * ((cdx * ady).abs() + (cdy * adx).abs())
        + clift * ((adx * bdy).abs() + (ady * bdx).abs());
    (det, mag)
}

/// Rotation + uniform scale + translation: `p ↦ R·s·p + t`, stored as the
/// complex multiplier `(a, b)` = `s·(cos θ, sin θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        a: 1.0,
        b: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    /// The unique similarity sending `p1 ↦ q1` and `p2 ↦ q2`. `None` when
    /// `p1 == p2`.
    pub fn from_point_pairs(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> Option<Self> {
        let (sx, sy) = (p2.x - p1.x, p2.y - p1.y);
        let (dx, dy) = (q2.x - q1.x, q2.y - q1.y);
        let den = sx * sx + sy * sy;
        if den == 0.0 || !den.is_finite() {
            return None;
        }
        // complex division (dx + i dy) / (sx + i sy)
        let a = (dx * sx + dy * sy) / den;
        let b = (dy * sx - dx * sy) / den;
        let tx = q1.x - (a * p1.x - b * p1.y);
        let ty = q1.y - (b * p1.x + a * p1.y);
        Some(Self { a, b, tx, ty })
    }

    #[inline]
    pub fn apply(&self, p: Point2) -> Point2 {
        Point2::new(
            self.a * p.x - self.b * p.y + self.tx,
            self.b * p.x + self.a * p.y + self.ty,
        )
    }

    pub fn inverse(&self) -> Option<Self> {
        let den = self.a * self.a + self.b * self.b;
        if den == 0.0 {
            return None;
        }
        let a = self.a / den;
        let b = -self.b / den;
        Some(Self {
            a,
            b,
            tx: -(a * self.tx - b * self.ty),
            ty: -(b * self.tx + a * self.ty),
        })
    }

    pub fn scale(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        (self.a - 1.0).abs() <= tol
            && self.b.abs() <= tol
            && self.tx.abs() <= tol
            && self.ty.abs() <= tol
    }
}
