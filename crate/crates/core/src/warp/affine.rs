use crate::geom::{orient2d, Point2};

use super::{WarpError, DEGENERATE_AREA};

/// Plane `z = a0 + a1·x + a2·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineCoeffs {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl AffineCoeffs {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a0 + self.a1 * x + self.a2 * y
    }
}

/// Fits the plane through three samples `(p_k, z_k)`.
///
/// The 3×3 system `[1 x_k y_k]·a = z_k` has a unique solution for a
/// non-degenerate triangle, which is also its least-squares solution. It is
/// solved relative to `p1` by Cramer's rule.
pub fn affine_fit(
    p1: Point2,
    p2: Point2,
    p3: Point2,
    z1: f64,
    z2: f64,
    z3: f64,
) -> Result<AffineCoeffs, WarpError> {
    let det = orient2d(p1, p2, p3);
    if det.is_nan() || det.abs() * 0.5 < DEGENERATE_AREA {
        return Err(WarpError::DegenerateTriangle);
    }
    let (dx2, dy2, dz2) = (p2.x - p1.x, p2.y - p1.y, z2 - z1);
    let (dx3, dy3, dz3) = (p3.x - p1.x, p3.y - p1.y, z3 - z1);
    let a1 = (dz2 * dy3 - dy2 * dz3) / det;
    let a2 = (dx2 * dz3 - dz2 * dx3) / det;
    let a0 = z1 - a1 * p1.x - a2 * p1.y;
    Ok(AffineCoeffs { a0, a1, a2 })
}

#[inline]
pub fn affine_eval(c: &AffineCoeffs, x: f64, y: f64) -> f64 {
    c.eval(x, y)
}
