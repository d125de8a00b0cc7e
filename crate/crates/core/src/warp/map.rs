use crate::corpus::{EyeAligned, GrayImage, LandmarkSet};
use crate::geom::{orient2d, Point2};
use crate::grid::Grid;

use super::affine::{affine_fit, AffineCoeffs};
use super::delaunay::{triangulate, Triangulation};
use super::reference::ReferenceContour;
use super::WarpError;

const NO_TRIANGLE: u32 = u32::MAX;

/// Feature channels carried by an aligned face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Intensity,
    Dx,
    Dy,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Intensity, Channel::Dx, Channel::Dy];

    pub fn code(self) -> u8 {
        match self {
            Channel::Intensity => 0,
            Channel::Dx => 1,
            Channel::Dy => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|ch| ch.code() == c)
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Intensity => "I",
            Channel::Dx => "dx",
            Channel::Dy => "dy",
        }
    }
}

/// For every pixel of the input image, the reference-frame coordinate it is
/// carried to.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap {
    pub xprime: Grid<f64>,
    pub yprime: Grid<f64>,
    /// True inside the convex hull of the source landmarks.
    pub valid: Grid<bool>,
}

impl CoordinateMap {
    pub fn width(&self) -> usize {
        self.valid.width()
    }

    pub fn height(&self) -> usize {
        self.valid.height()
    }
}

/// A face resampled onto the reference grid.
///
/// `xmap`/`ymap` hold, per grid pixel, the input-image coordinate it was
/// sampled from; `dx`/`dy` are their horizontal/vertical predecessor
/// differences. Eye-aligned faces carry intensity only.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFace {
    pub intensity: Grid<f64>,
    pub mask: Grid<bool>,
    pub xmap: Option<Grid<f64>>,
    pub ymap: Option<Grid<f64>>,
    pub dx: Option<Grid<f64>>,
    pub dy: Option<Grid<f64>>,
    /// Samples taken up to half a pixel outside the source image and clamped.
    pub clamped_samples: usize,
}

impl AlignedFace {
    pub fn width(&self) -> usize {
        self.intensity.width()
    }

    pub fn height(&self) -> usize {
        self.intensity.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.intensity.dims()
    }

    /// Intensity-only face from an eye-aligned image.
    pub fn from_eye_aligned(e: &EyeAligned) -> Self {
        Self::intensity_only(e.image.grid().clone(), e.mask.clone())
    }

    pub fn intensity_only(intensity: Grid<f64>, mask: Grid<bool>) -> Self {
        Self {
            intensity,
            mask,
            xmap: None,
            ymap: None,
            dx: None,
            dy: None,
            clamped_samples: 0,
        }
    }

    pub fn channel(&self, ch: Channel) -> Option<&Grid<f64>> {
        match ch {
            Channel::Intensity => Some(&self.intensity),
            Channel::Dx => self.dx.as_ref(),
            Channel::Dy => self.dy.as_ref(),
        }
    }

    /// Bilinear lookup of the source-coordinate maps at a grid position,
    /// using only unmasked neighbours.
    pub fn sample_source(&self, p: Point2) -> Option<Point2> {
        let (xmap, ymap) = (self.xmap.as_ref()?, self.ymap.as_ref()?);
        let (w, h) = self.dims();
        if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= (w - 1) as f64 && p.y <= (h - 1) as f64) {
            return None;
        }
        let c0 = (p.x.floor() as usize).min(w.saturating_sub(2));
        let r0 = (p.y.floor() as usize).min(h.saturating_sub(2));
        let (fx, fy) = (p.x - c0 as f64, p.y - r0 as f64);
        let mut acc = (0.0, 0.0, 0.0);
        for (dr, wy) in [(0, 1.0 - fy), (1, fy)] {
            for (dc, wx) in [(0, 1.0 - fx), (1, fx)] {
                let (r, c) = ((r0 + dr).min(h - 1), (c0 + dc).min(w - 1));
                let wt = wx * wy;
                if wt > 0.0 && self.mask[(r, c)] {
                    acc.0 += wt * xmap[(r, c)];
                    acc.1 += wt * ymap[(r, c)];
                    acc.2 += wt;
                }
            }
        }
        (acc.2 > 0.0).then(|| Point2::new(acc.0 / acc.2, acc.1 / acc.2))
    }
}

/// Per-pixel index of the triangle containing it, or `NO_TRIANGLE`.
/// Triangles are visited in index order so shared edges go to the lowest index.
fn rasterize_triangles(tri: &Triangulation, width: usize, height: usize) -> Grid<u32> {
    let mut lookup = Grid::filled(width, height, NO_TRIANGLE);
    for t in 0..tri.triangles().len() {
        let [a, b, c] = tri.corners(t);
        let det = orient2d(a, b, c);
        if det * 0.5 < super::DEGENERATE_AREA {
            continue;
        }
        let tol = -1e-12 * det;
        let lo_x = a.x.min(b.x).min(c.x).ceil().max(0.0);
        let hi_x = a.x.max(b.x).max(c.x).floor().min((width - 1) as f64);
        let lo_y = a.y.min(b.y).min(c.y).ceil().max(0.0);
        let hi_y = a.y.max(b.y).max(c.y).floor().min((height - 1) as f64);
        if lo_x > hi_x || lo_y > hi_y {
            continue;
        }
        for row in lo_y as usize..=hi_y as usize {
            for col in lo_x as usize..=hi_x as usize {
                if lookup[(row, col)] != NO_TRIANGLE {
                    continue;
                }
                let p = Point2::new(col as f64, row as f64);
                if orient2d(b, c, p) >= tol && orient2d(c, a, p) >= tol && orient2d(a, b, p) >= tol {
                    lookup[(row, col)] = t as u32;
                }
            }
        }
    }
    lookup
}

fn fit_triangle(
    tri: [usize; 3],
    domain: &[Point2],
    target: &[Point2],
) -> Result<(AffineCoeffs, AffineCoeffs), WarpError> {
    let [a, b, c] = tri;
    let (pa, pb, pc) = (domain[a], domain[b], domain[c]);
    let fx = affine_fit(pa, pb, pc, target[a].x, target[b].x, target[c].x)?;
    let fy = affine_fit(pa, pb, pc, target[a].y, target[b].y, target[c].y)?;
    Ok((fx, fy))
}

/// Forward piecewise-affine map: for each pixel of a `w × h` input image
/// inside the hull of `src`, the reference coordinate `(x′, y′)` obtained
/// from the affine fit through its containing source triangle.
pub fn forward_coordinate_map(
    img_size: (usize, usize),
    src: &LandmarkSet,
    reference: &ReferenceContour,
) -> Result<CoordinateMap, WarpError> {
    let (w, h) = img_size;
    if w == 0 || h == 0 {
        return Err(WarpError::InvalidGrid(w, h));
    }
    let tri = triangulate(src.points()).map_err(|e| WarpError::TriangulationFailed(e.to_string()))?;
    let lookup = rasterize_triangles(&tri, w, h);
    let fits = tri
        .triangles()
        .iter()
        .map(|&t| fit_triangle(t, src.points(), reference.points()).ok())
        .collect::<Vec<_>>();
    let mut xprime = Grid::filled(w, h, 0.0);
    let mut yprime = Grid::filled(w, h, 0.0);
    let mut valid = Grid::filled(w, h, false);
    for row in 0..h {
        for col in 0..w {
            let t = lookup[(row, col)];
            if t == NO_TRIANGLE {
                continue;
            }
            if let Some((fx, fy)) = fits[t as usize] {
                let (x, y) = (col as f64, row as f64);
                xprime[(row, col)] = fx.eval(x, y);
                yprime[(row, col)] = fy.eval(x, y);
                valid[(row, col)] = true;
            }
        }
    }
    Ok(CoordinateMap { xprime, yprime, valid })
}

/// Inverse piecewise-affine warper bound to one reference contour. The
/// reference triangulation and its per-pixel triangle lookup are built once
/// and shared by every face.
#[derive(Debug, Clone)]
pub struct Warper {
    reference: ReferenceContour,
    triangulation: Triangulation,
    lookup: Grid<u32>,
}

impl Warper {
    pub fn new(reference: ReferenceContour) -> Result<Self, WarpError> {
        let triangulation = triangulate(reference.points())
            .map_err(|e| WarpError::TriangulationFailed(e.to_string()))?;
        let (w, h) = reference.grid();
        let lookup = rasterize_triangles(&triangulation, w, h);
        Ok(Self {
            reference,
            triangulation,
            lookup,
        })
    }

    pub fn reference(&self) -> &ReferenceContour {
        &self.reference
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.triangulation
    }

    pub fn grid(&self) -> (usize, usize) {
        self.reference.grid()
    }

    /// Pixels of the target grid covered by the reference triangulation.
    pub fn hull_mask(&self) -> Grid<bool> {
        let (w, h) = self.grid();
        Grid::from_vec(w, h, self.lookup.as_slice().iter().map(|&t| t != NO_TRIANGLE).collect())
            .expect("same dims")
    }

    /// Source position of a reference-grid point under the piecewise-affine
    /// map for `src`; `None` outside the reference hull.
    pub fn map_point(&self, p: Point2, src: &LandmarkSet) -> Option<Point2> {
        let t = (0..self.triangulation.triangles().len()).find(|&t| {
            let [a, b, c] = self.triangulation.corners(t);
            let det = orient2d(a, b, c);
            let tol = -1e-9 * det.abs();
            det * 0.5 >= super::DEGENERATE_AREA
                && orient2d(b, c, p) >= tol
                && orient2d(c, a, p) >= tol
                && orient2d(a, b, p) >= tol
        })?;
        let (fx, fy) = fit_triangle(self.triangulation.triangles()[t], self.reference.points(), src.points()).ok()?;
        Some(Point2::new(fx.eval(p.x, p.y), fy.eval(p.x, p.y)))
    }

    /// Resamples `img` onto the reference grid. Each grid pixel inside the
    /// reference hull is mapped through its reference triangle onto the
    /// matching source triangle and the image is sampled bilinearly there.
    /// Geometry differences (`dx`, `dy`) are left empty.
    pub fn warp(&self, img: &GrayImage, src: &LandmarkSet) -> Result<AlignedFace, WarpError> {
        let (w, h) = self.grid();
        let fits: Vec<Option<(AffineCoeffs, AffineCoeffs)>> = self
            .triangulation
            .triangles()
            .iter()
            .map(|&t| fit_triangle(t, self.reference.points(), src.points()).ok())
            .collect();
        let mut intensity = Grid::filled(w, h, 0.0);
        let mut xmap = Grid::filled(w, h, 0.0);
        let mut ymap = Grid::filled(w, h, 0.0);
        let mut mask = Grid::filled(w, h, false);
        let mut clamped = 0usize;
        for row in 0..h {
            for col in 0..w {
                let t = self.lookup[(row, col)];
                if t == NO_TRIANGLE {
                    continue;
                }
                let Some((fx, fy)) = fits[t as usize] else {
                    continue;
                };
                let (u, v) = (col as f64, row as f64);
                let (x, y) = (fx.eval(u, v), fy.eval(u, v));
                if let Some(s) = img.sample_bilinear(x, y) {
                    intensity[(row, col)] = s.value;
                    xmap[(row, col)] = x;
                    ymap[(row, col)] = y;
                    mask[(row, col)] = true;
                    clamped += s.clamped as usize;
                }
            }
        }
        if clamped > 0 {
            log::debug!("warp clamped {clamped} samples at the source image border");
        }
        Ok(AlignedFace {
            intensity,
            mask,
            xmap: Some(xmap),
            ymap: Some(ymap),
            dx: None,
            dy: None,
            clamped_samples: clamped,
        })
    }
}

/// One-shot warp onto `grid`, which must be the reference contour's grid.
pub fn warp_to_grid(
    img: &GrayImage,
    src: &LandmarkSet,
    reference: &ReferenceContour,
    grid: (usize, usize),
) -> Result<AlignedFace, WarpError> {
    if grid != reference.grid() {
        return Err(WarpError::GridMismatch {
            expected: reference.grid(),
            found: grid,
        });
    }
    Warper::new(reference.clone())?.warp(img, src)
}

/// Fills `dx`/`dy`: `dx(r, c) = xmap(r, c) − xmap(r, c−1)` and
/// `dy(r, c) = ymap(r, c) − ymap(r−1, c)`. The first column of `dx`, the
/// first row of `dy`, and any difference touching a masked pixel are zero.
pub fn extract_geometry_maps(mut face: AlignedFace) -> Result<AlignedFace, WarpError> {
    let (Some(xmap), Some(ymap)) = (face.xmap.as_ref(), face.ymap.as_ref()) else {
        return Err(WarpError::MapsMissing);
    };
    let (w, h) = face.dims();
    let mask = &face.mask;
    let dx = Grid::from_fn(w, h, |r, c| {
        if c >= 1 && mask[(r, c)] && mask[(r, c - 1)] {
            xmap[(r, c)] - xmap[(r, c - 1)]
        } else {
            0.0
        }
    });
    let dy = Grid::from_fn(w, h, |r, c| {
        if r >= 1 && mask[(r, c)] && mask[(r - 1, c)] {
            ymap[(r, c)] - ymap[(r - 1, c)]
        } else {
            0.0
        }
    });
    face.dx = Some(dx);
    face.dy = Some(dy);
    Ok(face)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LANDMARK_COUNT;

    /// A hand-placed 68-point layout that triangulates cleanly.
    fn ring_landmarks(cx: f64, cy: f64, scale: f64) -> LandmarkSet {
        let pts = (0..LANDMARK_COUNT)
            .map(|i| {
                let ring = (i / 17) as f64 + 1.0;
                let t = std::f64::consts::TAU * (i % 17) as f64 / 17.0 + 0.1 * ring;
                Point2::new(cx + scale * ring * t.cos(), cy + scale * ring * 0.8 * t.sin())
            })
            .collect();
        LandmarkSet::new(pts).unwrap()
    }

    fn reference(grid: (usize, usize)) -> ReferenceContour {
        ReferenceContour::new(ring_landmarks(70.0, 60.0, 12.0), grid, 1).unwrap()
    }

    #[test]
    fn identity_forward_map() {
        let r = reference((140, 120));
        let m = forward_coordinate_map((140, 120), r.landmarks(), &r).unwrap();
        let mut count = 0;
        for row in 0..120 {
            for col in 0..140 {
                if m.valid[(row, col)] {
                    count += 1;
                    assert!((m.xprime[(row, col)] - col as f64).abs() < 1e-9);
                    assert!((m.yprime[(row, col)] - row as f64).abs() < 1e-9);
                }
            }
        }
        assert!(count > 1000);
    }

    #[test]
    fn translated_source_shifts_back() {
        let r = reference((140, 120));
        let src = r.landmarks().map(|p| p + Point2::new(5.0, -3.0));
        let m = forward_coordinate_map((150, 130), &src, &r).unwrap();
        for row in 0..130 {
            for col in 0..150 {
                if m.valid[(row, col)] {
                    assert!((m.xprime[(row, col)] - (col as f64 - 5.0)).abs() < 1e-9);
                    assert!((m.yprime[(row, col)] - (row as f64 + 3.0)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn scaled_source_maps_by_half() {
        let r = reference((140, 120));
        let src = r.landmarks().map(|p| p * 2.0);
        let m = forward_coordinate_map((290, 250), &src, &r).unwrap();
        // per-triangle oracle: the affine map of each triangle is p -> p/2
        for row in (0..250).step_by(3) {
            for col in (0..290).step_by(3) {
                if m.valid[(row, col)] {
                    assert!((m.xprime[(row, col)] - col as f64 / 2.0).abs() < 1e-9);
                    assert!((m.yprime[(row, col)] - row as f64 / 2.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn landmark_pixels_hit_reference_exactly() {
        // integer landmark positions so they coincide with pixels
        let base = ring_landmarks(70.0, 60.0, 12.0).map(|p| Point2::new(p.x.round(), p.y.round()));
        let r = ReferenceContour::new(base.map(|p| p * 0.5 + Point2::new(30.0, 25.0)), (140, 120), 1).unwrap();
        let m = forward_coordinate_map((140, 120), &base, &r).unwrap();
        for (p, q) in base.points().iter().zip(r.points()) {
            let (row, col) = (p.y as usize, p.x as usize);
            assert!(m.valid[(row, col)]);
            assert!((m.xprime[(row, col)] - q.x).abs() < 1e-9);
            assert!((m.yprime[(row, col)] - q.y).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_warp_reproduces_image() {
        let r = reference((140, 120));
        let img = GrayImage::from_fn(140, 120, |row, col| ((row * 7 + col * 13) % 97) as f64 / 96.0);
        let face = warp_to_grid(&img, r.landmarks(), &r, (140, 120)).unwrap();
        for row in 0..120 {
            for col in 0..140 {
                if face.mask[(row, col)] {
                    assert_eq!(face.intensity[(row, col)], img.at(row, col));
                } else {
                    assert_eq!(face.intensity[(row, col)], 0.0);
                }
            }
        }
        let face = extract_geometry_maps(face).unwrap();
        let (dx, dy) = (face.dx.as_ref().unwrap(), face.dy.as_ref().unwrap());
        for row in 1..119 {
            for col in 1..139 {
                if face.mask[(row, col)] && face.mask[(row, col - 1)] {
                    assert_eq!(dx[(row, col)], 1.0);
                }
                if face.mask[(row, col)] && face.mask[(row - 1, col)] {
                    assert_eq!(dy[(row, col)], 1.0);
                }
            }
        }
    }

    #[test]
    fn constant_image_stays_constant() {
        let r = reference((140, 120));
        let src = r.landmarks().map(|p| Point2::new(p.x * 1.1 + 2.0, p.y * 0.9 + 4.0));
        let img = GrayImage::from_fn(170, 130, |_, _| 0.375);
        let face = warp_to_grid(&img, &src, &r, (140, 120)).unwrap();
        for (v, m) in face.intensity.as_slice().iter().zip(face.mask.as_slice()) {
            if *m {
                assert!((v - 0.375).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ramp_under_translation_is_analytic() {
        let r = reference((140, 120));
        let src = r.landmarks().map(|p| p + Point2::new(4.25, -2.5));
        let (w, h) = (160, 130);
        let img = GrayImage::from_fn(w, h, |_, col| col as f64 / (w - 1) as f64);
        let face = warp_to_grid(&img, &src, &r, (140, 120)).unwrap();
        let xmap = face.xmap.as_ref().unwrap();
        for row in 0..120 {
            for col in 0..140 {
                if face.mask[(row, col)] {
                    let x = col as f64 + 4.25;
                    assert!((xmap[(row, col)] - x).abs() < 1e-9);
                    assert!((face.intensity[(row, col)] - x / (w - 1) as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn grid_mismatch_and_missing_maps() {
        let r = reference((140, 120));
        let img = GrayImage::from_fn(140, 120, |_, _| 0.5);
        assert!(matches!(
            warp_to_grid(&img, r.landmarks(), &r, (100, 100)),
            Err(WarpError::GridMismatch { .. })
        ));
        let plain = AlignedFace::intensity_only(Grid::filled(4, 4, 0.0), Grid::filled(4, 4, true));
        assert!(matches!(extract_geometry_maps(plain), Err(WarpError::MapsMissing)));
    }

    #[test]
    fn out_of_image_samples_are_masked() {
        let r = reference((140, 120));
        // shift the source so the face hangs off the left edge of the image
        let src = r.landmarks().map(|p| p + Point2::new(-40.25, 0.0));
        let img = GrayImage::from_fn(140, 120, |_, _| 0.8);
        let face = warp_to_grid(&img, &src, &r, (140, 120)).unwrap();
        let xmap = face.xmap.as_ref().unwrap();
        let hull = Warper::new(r).unwrap().hull_mask();
        for row in 0..120 {
            for col in 0..140 {
                let inside_image = col as f64 - 40.25 >= -0.5;
                assert_eq!(face.mask[(row, col)], hull[(row, col)] && inside_image);
                if face.mask[(row, col)] {
                    assert!(xmap[(row, col)] >= -0.5);
                }
            }
        }
        assert!(face.clamped_samples > 0);
    }
}
