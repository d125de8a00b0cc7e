//! Delaunay triangulation of small point sets (landmarks).
//!
//! Construction is a lexicographic sweep that fans each new point to the
//! visible part of the current hull, followed by Lawson edge flips until
//! every interior edge is locally Delaunay. When the four points around an
//! edge are cocircular the diagonal with the lexicographically smaller
//! vertex-index pair is kept, so the output depends only on the input order.

use std::collections::HashMap;

use crate::geom::{incircle, orient2d, Point2};

use super::{WarpError, DEGENERATE_AREA};

/// Relative tolerance on the in-circle determinant below which four points
/// are treated as cocircular.
const INCIRCLE_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    vertices: Vec<Point2>,
    /// Vertex-index triples with positive `orient2d`, smallest index first,
    /// sorted lexicographically.
    triangles: Vec<[usize; 3]>,
}

impl Triangulation {
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn corners(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Undirected edges as sorted index pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }
}

/// Delaunay triangulation of `points`.
pub fn triangulate(points: &[Point2]) -> Result<Triangulation, WarpError> {
    if points.len() < 3 {
        return Err(WarpError::TooFewPoints(points.len()));
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(WarpError::NonFinitePoint(i));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let (p, q) = (points[i], points[j]);
        p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)).then(i.cmp(&j))
    });
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(WarpError::DuplicatePoint(w[0].min(w[1]), w[0].max(w[1])));
        }
    }

    let mut tris = sweep(points, &order)?;
    legalize(points, &mut tris)?;

    for t in tris.iter_mut() {
        let k = (0..3).min_by_key(|&k| t[k]).unwrap();
        t.rotate_left(k);
    }
    tris.sort_unstable();
    Ok(Triangulation {
        vertices: points.to_vec(),
        triangles: tris,
    })
}

/// Initial (non-Delaunay) triangulation of the convex hull.
fn sweep(points: &[Point2], order: &[usize]) -> Result<Vec<[usize; 3]>, WarpError> {
    let p = |i: usize| points[i];
    let min_orient = 2.0 * DEGENERATE_AREA;

    // first point that leaves the line through order[0], order[1]
    let k = (2..order.len())
        .find(|&k| orient2d(p(order[0]), p(order[1]), p(order[k])).abs() > min_orient)
        .ok_or(WarpError::AllCollinear)?;
    let apex = order[k];
    let mut tris = Vec::with_capacity(2 * points.len());
    // the first k points are collinear and sorted along their line
    let positive = orient2d(p(order[0]), p(order[1]), p(apex)) > 0.0;
    for j in 0..k - 1 {
        let (a, b) = (order[j], order[j + 1]);
        tris.push(if positive { [a, b, apex] } else { [b, a, apex] });
    }
    // hull kept with positive orientation (interior on the left of each edge)
    let mut hull: Vec<usize> = if positive {
        order[..k].iter().copied().chain([apex]).collect()
    } else {
        std::iter::once(order[0])
            .chain([apex])
            .chain(order[1..k].iter().rev().copied())
            .collect()
    };

    for &q in &order[k + 1..] {
        let n = hull.len();
        let orient_of = |j: usize| orient2d(p(hull[j]), p(hull[(j + 1) % n]), p(q));
        let mut visible: Vec<bool> = (0..n).map(|j| orient_of(j) < -min_orient).collect();
        if !visible.iter().any(|&v| v) {
            // nearly collinear with the hull: fall back to strict visibility
            visible = (0..n).map(|j| orient_of(j) < 0.0).collect();
        }
        if !visible.iter().any(|&v| v) {
            return Err(WarpError::TriangulationFailed(
                "sweep point has no visible hull edge".into(),
            ));
        }
        // the visible edges form one contiguous run; find its start
        let start = (0..n)
            .find(|&j| visible[j] && !visible[(j + n - 1) % n])
            .ok_or_else(|| WarpError::TriangulationFailed("whole hull visible".into()))?;
        let mut len = 0;
        while visible[(start + len) % n] {
            let (a, b) = (hull[(start + len) % n], hull[(start + len + 1) % n]);
            tris.push([a, q, b]);
            len += 1;
        }
        // drop the interior vertices of the run and insert q after its start
        let mut next = Vec::with_capacity(n + 1);
        for off in 0..n {
            let j = (start + off) % n;
            if off == 0 {
                next.push(hull[j]);
                next.push(q);
            } else if off >= len {
                next.push(hull[j]);
            }
        }
        hull = next;
    }
    Ok(tris)
}

/// Lawson flips until every interior edge is locally Delaunay.
fn legalize(points: &[Point2], tris: &mut [[usize; 3]]) -> Result<(), WarpError> {
    let p = |i: usize| points[i];
    // directed edge (u, v) -> triangle holding it in positive orientation
    let mut owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(tris.len() * 3);
    for (t, &[a, b, c]) in tris.iter().enumerate() {
        owner.insert((a, b), t);
        owner.insert((b, c), t);
        owner.insert((c, a), t);
    }
    let mut stack: Vec<(usize, usize)> = owner
        .keys()
        .filter(|&&(u, v)| u < v && owner.contains_key(&(v, u)))
        .copied()
        .collect();
    stack.sort_unstable();

    let third = |t: [usize; 3], u: usize, v: usize| -> usize {
        t.into_iter().find(|&x| x != u && x != v).expect("triangle has three vertices")
    };
    let max_flips = 64 * points.len() * points.len() + 1024;
    let mut flips = 0usize;
    while let Some((u, v)) = stack.pop() {
        let (Some(&t1), Some(&t2)) = (owner.get(&(u, v)), owner.get(&(v, u))) else {
            continue;
        };
        let w = third(tris[t1], u, v); // t1 = (u, v, w)
        let z = third(tris[t2], v, u); // t2 = (v, u, z)
        let (det, mag) = incircle(p(u), p(v), p(w), p(z));
        let tol = INCIRCLE_REL_TOL * mag;
        let flip = if det > tol {
            true
        } else if det >= -tol {
            (w.min(z), w.max(z)) < (u.min(v), u.max(v))
        } else {
            false
        };
        if !flip {
            continue;
        }
        // new triangles (w, u, z) and (w, z, v) need positive area
        let min_orient = 2.0 * DEGENERATE_AREA;
        if orient2d(p(w), p(u), p(z)) <= min_orient || orient2d(p(w), p(z), p(v)) <= min_orient {
            continue;
        }
        flips += 1;
        if flips > max_flips {
            return Err(WarpError::TriangulationFailed("edge flipping did not converge".into()));
        }
        for e in [(u, v), (v, w), (w, u), (v, u), (u, z), (z, v)] {
            owner.remove(&e);
        }
        tris[t1] = [w, u, z];
        tris[t2] = [w, z, v];
        for (e, t) in [((w, u), t1), ((u, z), t1), ((z, w), t1), ((w, z), t2), ((z, v), t2), ((v, w), t2)] {
            owner.insert(e, t);
        }
        for (a, b) in [(u, z), (z, v), (v, w), (w, u)] {
            if owner.contains_key(&(a, b)) && owner.contains_key(&(b, a)) {
                stack.push((a.min(b), a.max(b)));
            }
        }
    }
    Ok(())
}
