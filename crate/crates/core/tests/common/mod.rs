//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pixalign::corpus::{GrayImage, LandmarkSet};
use pixalign::fisher::LabeledSamples;
use pixalign::geom::Point2;
use pixalign::grid::Grid;
use pixalign::warp::{AlignedFace, Triangulation};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random LDA problem with `C − 1 ≤ d ≤ 6`, `2 ≤ C ≤ 4`, `N ≤ 30` and `N − C ≥ d`
/// (so the within-class scatter is almost surely nonsingular).
pub fn random_lda_instance(rng: &mut ChaCha8Rng) -> LabeledSamples {
    let c = rng.random_range(2..=4);
    // d ≥ C − 1 so that S_b can reach full rank C − 1
    let d = rng.random_range(c - 1..=6);
    let n_min = (c + d).max(2 * c);
    let n = rng.random_range(n_min..=30);
    let mut counts = vec![2; c];
    for _ in 0..n - 2 * c {
        counts[rng.random_range(0..c)] += 1;
    }
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (k, &m) in counts.iter().enumerate() {
        let center: Vec<f64> = (0..d).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let spread: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
        for _ in 0..m {
            vectors.push((0..d).map(|j| center[j] + spread[j] * rng.sample::<f64, _>(StandardNormal)).collect());
            labels.push(k * 7 + 1);
        }
    }
    LabeledSamples::new(vectors, labels).unwrap()
}

/// Scatter matrices straight from the definitions, looping over entries.
pub fn brute_scatter(s: &LabeledSamples) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = s.dim();
    let mut classes: Vec<usize> = s.labels().to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut means = Vec::new();
    for &c in &classes {
        let members: Vec<&DVector<f64>> = s.vectors().iter().zip(s.labels()).filter(|(_, &l)| l == c).map(|(v, _)| v).collect();
        let mut m = vec![0.0; d];
        for v in &members {
            for j in 0..d {
                m[j] += v[j];
            }
        }
        let n = members.len() as f64;
        means.push((m.iter().map(|x| x / n).collect::<Vec<f64>>(), members.len()));
    }
    let mu: Vec<f64> = (0..d).map(|j| means.iter().map(|(m, _)| m[j]).sum::<f64>() / means.len() as f64).collect();
    let mut sw = DMatrix::zeros(d, d);
    let mut sb = DMatrix::zeros(d, d);
    let mut st = DMatrix::zeros(d, d);
    for (v, &l) in s.vectors().iter().zip(s.labels()) {
        let ci = classes.iter().position(|&c| c == l).unwrap();
        for a in 0..d {
            for b in 0..d {
                sw[(a, b)] += (v[a] - means[ci].0[a]) * (v[b] - means[ci].0[b]);
                st[(a, b)] += (v[a] - mu[a]) * (v[b] - mu[b]);
            }
        }
    }
    for (m, n) in &means {
        for a in 0..d {
            for b in 0..d {
                sb[(a, b)] += *n as f64 * (m[a] - mu[a]) * (m[b] - mu[b]);
            }
        }
    }
    (sw, sb, st)
}

/// Discriminant directions from the general (non-symmetric) eigenproblem
/// `S_w⁻¹ S_b v = λ v`: eigenvalues from the complex eigen-solver, each
/// eigenvector as the SVD null vector of `S_b − λ S_w`. Descending order,
/// unit length, only eigenvalues above `1e-9·λ_max`. Each pair is then
/// polished by Rayleigh-quotient inverse iteration.
pub fn oracle_directions(s: &LabeledSamples) -> Vec<DVector<f64>> {
    let (sw, sb, _) = brute_scatter(s);
    let m = sw.clone().try_inverse().expect("nonsingular S_w") * &sb;
    let mut lambdas: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let top = lambdas[0];
    lambdas
        .into_iter()
        .filter(|&l| l > 1e-9 * top)
        .map(|mut l| {
            let null_vector = |l: f64| {
                let svd = (&sb - &sw * l).svd(false, true);
                let vt = svd.v_t.unwrap();
                let k = (0..svd.singular_values.len())
                    .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
                    .unwrap();
                let v = vt.row(k).transpose();
                &v / v.norm()
            };
            let mut v = null_vector(l);
            // the SVD null vector blurs when a second singular value is also
            // tiny; shifted inverse iteration on the pencil separates them
            for _ in 0..3 {
                l = (v.transpose() * &sb * &v)[0] / (v.transpose() * &sw * &v)[0];
                let shift = l * (1.0 + 1e-9) + 1e-300;
                let lu = (&sb - &sw * shift).lu();
                if let Some(x) = lu.solve(&(&sw * &v)) {
                    v = &x / x.norm();
                }
            }
            v
        })
        .collect()
}

/// Angle between two lines (directions up to sign).
pub fn line_angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (a, b) = (a / a.norm(), b / b.norm());
    let chord = (&a - &b).norm().min((&a + &b).norm());
    2.0 * (chord / 2.0).min(1.0).asin()
}

/// No vertex lies strictly inside any triangle's circumcircle (relative
/// tolerance on the circumradius).
pub fn empty_circle_violations(t: &Triangulation) -> usize {
    let v = t.vertices();
    let mut bad = 0;
    for tri in t.triangles() {
        let [a, b, c] = tri.map(|i| v[i]);
        let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
        let sq = |p: Point2| p.x * p.x + p.y * p.y;
        let ux = (sq(a) * (b.y - c.y) + sq(b) * (c.y - a.y) + sq(c) * (a.y - b.y)) / d;
        let uy = (sq(a) * (c.x - b.x) + sq(b) * (a.x - c.x) + sq(c) * (b.x - a.x)) / d;
        let center = Point2::new(ux, uy);
        let r = center.distance(a);
        for (k, p) in v.iter().enumerate() {
            if tri.contains(&k) {
                continue;
            }
            if center.distance(*p) < r * (1.0 - 1e-9) {
                bad += 1;
            }
        }
    }
    bad
}

/// `n` random points in a box, rejecting near-duplicates.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, size: f64) -> Vec<Point2> {
    let mut pts: Vec<Point2> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = Point2::new(rng.random_range(0.0..size), rng.random_range(0.0..size));
        if pts.iter().all(|q| q.distance(p) > 1e-3 * size) {
            pts.push(p);
        }
    }
    pts
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.random_range(0.0..1.0))
}

/// Landmarks displaced by a smooth random field of amplitude up to `amp`
/// pixels, then shifted by `offset`.
pub fn smoothly_perturbed(rng: &mut ChaCha8Rng, base: &LandmarkSet, amp: f64, offset: Point2) -> LandmarkSet {
    let waves: Vec<(f64, f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    base.map(|p| {
        let mut d = Point2::new(0.0, 0.0);
        for &(kx, ky, ph, ax, ay) in &waves {
            let s = (0.03 * (kx * p.x + ky * p.y) + ph).sin();
            d = d + Point2::new(ax, ay) * (s * amp / 3.0);
        }
        p + d + offset
    })
}

/// Aligned faces with full masks whose three channels are class templates
/// plus noise; every patch of every channel is trainable.
pub fn textured_faces(
    rng: &mut ChaCha8Rng,
    grid: (usize, usize),
    classes: usize,
    per_class: usize,
    noise: f64,
) -> (Vec<AlignedFace>, Vec<usize>) {
    let (w, h) = grid;
    let templates: Vec<[Grid<f64>; 3]> = (0..classes)
        .map(|_| [0, 1, 2].map(|_| Grid::from_fn(w, h, |_, _| rng.random_range(0.0..1.0))))
        .collect();
    let n = Normal::new(0.0, noise).unwrap();
    let mut faces = Vec::new();
    let mut labels = Vec::new();
    for (c, t) in templates.iter().enumerate() {
        for _ in 0..per_class {
            let [i, x, y] = t.clone().map(|g| Grid::from_fn(w, h, |r, col| g[(r, col)] + n.sample(rng)));
            faces.push(AlignedFace {
                intensity: i,
                mask: Grid::filled(w, h, true),
                xmap: None,
                ymap: None,
                dx: Some(x),
                dy: Some(y),
                clamped_samples: 0,
            });
            labels.push(c);
        }
    }
    (faces, labels)
}

/// Compensated sum, used to rebuild coordinate maps from their differences.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Largest error of rebuilding `xmap`/`ymap` by accumulating `dx` along
/// rows and `dy` along columns inside each run of unmasked pixels.
pub fn telescoping_error(face: &AlignedFace) -> f64 {
    let (w, h) = face.dims();
    let (xmap, ymap) = (face.xmap.as_ref().unwrap(), face.ymap.as_ref().unwrap());
    let (dx, dy) = (face.dx.as_ref().unwrap(), face.dy.as_ref().unwrap());
    let m = &face.mask;
    let mut worst = 0.0f64;
    for r in 0..h {
        let mut start: Option<usize> = None;
        for c in 0..w {
            if !m[(r, c)] {
                start = None;
                continue;
            }
            let s = *start.get_or_insert(c);
            let rebuilt = neumaier_sum(std::iter::once(xmap[(r, s)]).chain((s + 1..=c).map(|k| dx[(r, k)])));
            worst = worst.max((rebuilt - xmap[(r, c)]).abs());
        }
    }
    for c in 0..w {
        let mut start: Option<usize> = None;
        for r in 0..h {
            if !m[(r, c)] {
                start = None;
                continue;
            }
            let s = *start.get_or_insert(r);
            let rebuilt = neumaier_sum(std::iter::once(ymap[(s, c)]).chain((s + 1..=r).map(|k| dy[(k, c)])));
            worst = worst.max((rebuilt - ymap[(r, c)]).abs());
        }
    }
    worst
}
