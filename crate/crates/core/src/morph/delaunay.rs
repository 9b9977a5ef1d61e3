//! Delaunay triangulation by incremental hull construction followed by
//! Lawson edge flips, using exact orientation and in-circle predicates.
//!
//! Cocircular quadrilaterals admit two Delaunay diagonals. The diagonal whose
//! sorted index pair is lexicographically smaller is kept, which makes the
//! output a pure function of the input point order.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::{LandmarkSet, MorphError, Point};

/// Counter-clockwise index triples (in the y-up sense of `orient2d > 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct Triangulation {
    points: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    landmark_count: usize,
}

impl Triangulation {
    /// All vertices, including the synthetic frame corners if present.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Number of leading vertices that came from the landmark set.
    pub fn landmark_count(&self) -> usize {
        self.landmark_count
    }

    pub fn has_frame_corners(&self) -> bool {
        self.points.len() > self.landmark_count
    }

    /// Per-pixel count of triangles claiming each pixel center, row-major.
    pub fn coverage(&self, width: usize, height: usize) -> Vec<u32> {
        let mut counts = vec![0u32; width * height];
        for t in &self.triangles {
            let verts = [self.points[t[0]], self.points[t[1]], self.points[t[2]]];
            for_each_covered_pixel(verts, width, height, |x, y| counts[y * width + x] += 1);
        }
        counts
    }
}

/// Triangulates landmarks plus the four frame corners, so the triangles tile
/// the whole frame.
pub fn delaunay(landmarks: &LandmarkSet) -> Result<Triangulation, MorphError> {
    let points = landmarks.with_frame_corners();
    let triangles = triangulate_indices(&points)?;
    Ok(Triangulation {
        points,
        triangles,
        landmark_count: landmarks.len(),
    })
}

/// Triangulates an arbitrary point list without frame corners.
pub fn delaunay_points(points: &[Point]) -> Result<Triangulation, MorphError> {
    let triangles = triangulate_indices(points)?;
    Ok(Triangulation {
        points: points.to_vec(),
        triangles,
        landmark_count: points.len(),
    })
}

#[inline]
fn orient(p: &[Point], a: usize, b: usize, c: usize) -> f64 {
    robust::orient2d(p[a].coord(), p[b].coord(), p[c].coord())
}

#[inline]
fn incircle(p: &[Point], a: usize, b: usize, c: usize, d: usize) -> f64 {
    robust::incircle(p[a].coord(), p[b].coord(), p[c].coord(), p[d].coord())
}

fn ccw(p: &[Point], t: [usize; 3]) -> [usize; 3] {
    if orient(p, t[0], t[1], t[2]) > 0.0 {
        t
    } else {
        [t[0], t[2], t[1]]
    }
}

fn triangulate_indices(p: &[Point]) -> Result<Vec<[usize; 3]>, MorphError> {
    if p.iter().any(|q| !q.x.is_finite() || !q.y.is_finite()) {
        return Err(MorphError::NonFinite {
            index: p.iter().position(|q| !q.x.is_finite() || !q.y.is_finite()).unwrap(),
        });
    }
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&i, &j| {
        p[i].x
            .total_cmp(&p[j].x)
            .then(p[i].y.total_cmp(&p[j].y))
            .then(i.cmp(&j))
    });
    // Coincident points keep only their lowest index.
    order.dedup_by(|later, earlier| p[*later] == p[*earlier]);
    if order.len() < 3 {
        return Err(MorphError::TooFewPoints(order.len()));
    }

    let k = (2..order.len())
        .find(|&k| orient(p, order[0], order[1], order[k]) != 0.0)
        .ok_or(MorphError::Collinear)?;
    let apex = order[k];
    let mut tris: Vec<[usize; 3]> = (0..k - 1)
        .map(|i| ccw(p, [order[i], order[i + 1], apex]))
        .collect();
    let mut hull: Vec<usize> = order[..k].to_vec();
    hull.push(apex);
    if orient(p, order[0], order[k - 1], apex) < 0.0 {
        hull.reverse();
    }

    for &q in &order[k + 1..] {
        let m = hull.len();
        let visible: Vec<bool> = (0..m)
            .map(|i| orient(p, hull[i], hull[(i + 1) % m], q) < 0.0)
            .collect();
        let start = (0..m)
            .find(|&i| !visible[i] && visible[(i + 1) % m])
            .map(|i| (i + 1) % m)
            .expect("a new extreme point sees at least one hull edge");
        let mut count = 0;
        while visible[(start + count) % m] {
            let a = hull[(start + count) % m];
            let b = hull[(start + count + 1) % m];
            tris.push([b, a, q]);
            count += 1;
        }
        let mut next = Vec::with_capacity(m + 1);
        let mut i = (start + count) % m;
        loop {
            next.push(hull[i]);
            if i == start {
                break;
            }
            i = (i + 1) % m;
        }
        next.push(q);
        hull = next;
    }

    legalize(p, &mut tris);
    break_cocircular_ties(p, &mut tris);
    Ok(tris)
}

/// Directed edge `(a, b)` to the triangle holding it and the opposite vertex.
fn edge_map(tris: &[[usize; 3]]) -> HashMap<(usize, usize), (usize, usize)> {
    let mut map = HashMap::with_capacity(tris.len() * 3);
    for (ti, t) in tris.iter().enumerate() {
        for e in 0..3 {
            map.insert((t[e], t[(e + 1) % 3]), (ti, t[(e + 2) % 3]));
        }
    }
    map
}

/// Interior edges as `(t, a, b, c, u, d)`: triangle `t = (a, b, c)` and its
/// neighbor `u = (b, a, d)` across edge `ab`, visited once per edge.
fn interior_edges(tris: &[[usize; 3]]) -> Vec<(usize, usize, usize, usize, usize, usize)> {
    let map = edge_map(tris);
    let mut out = Vec::new();
    for (ti, t) in tris.iter().enumerate() {
        for e in 0..3 {
            let (a, b, c) = (t[e], t[(e + 1) % 3], t[(e + 2) % 3]);
            if a < b {
                if let Some(&(ui, d)) = map.get(&(b, a)) {
                    out.push((ti, a, b, c, ui, d));
                }
            }
        }
    }
    out
}

fn flip(tris: &mut [[usize; 3]], t: usize, u: usize, a: usize, b: usize, c: usize, d: usize) {
    // Quad a, d, b, c in counter-clockwise order; new diagonal c-d.
    tris[t] = [a, d, c];
    tris[u] = [d, b, c];
}

fn legalize(p: &[Point], tris: &mut [[usize; 3]]) {
    loop {
        let mut flipped = false;
        for (t, a, b, c, u, d) in interior_edges(tris) {
            // Earlier flips in this pass may have invalidated the entry.
            if !is_tri(tris[t], a, b, c) || !is_tri(tris[u], b, a, d) {
                continue;
            }
            if incircle(p, a, b, c, d) > 0.0 {
                flip(tris, t, u, a, b, c, d);
                flipped = true;
            }
        }
        if !flipped {
            break;
        }
    }
}

fn is_tri(t: [usize; 3], a: usize, b: usize, c: usize) -> bool {
    (0..3).any(|e| t[e] == a && t[(e + 1) % 3] == b && t[(e + 2) % 3] == c)
}

fn pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn break_cocircular_ties(p: &[Point], tris: &mut [[usize; 3]]) {
    // Each flip replaces an edge by a lexicographically smaller one, so the
    // sorted edge list strictly decreases and the loop terminates.
    loop {
        let mut flipped = false;
        for (t, a, b, c, u, d) in interior_edges(tris) {
            if !is_tri(tris[t], a, b, c) || !is_tri(tris[u], b, a, d) {
                continue;
            }
            if incircle(p, a, b, c, d) != 0.0 {
                continue;
            }
            let convex = orient(p, a, d, c) > 0.0 && orient(p, d, b, c) > 0.0;
            if convex && pair(c, d).cmp(&pair(a, b)) == Ordering::Less {
                flip(tris, t, u, a, b, c, d);
                flipped = true;
            }
        }
        if !flipped {
            break;
        }
    }
}

/// Calls `f(x, y)` for every pixel whose center lies in the triangle.
///
/// Points on an edge belong to the triangle for which that edge, traversed
/// counter-clockwise, points "up" (decreasing y) or, when horizontal, towards
/// increasing x. Adjacent triangles traverse a shared edge in opposite
/// directions, so each center is claimed exactly once across a mesh.
pub(crate) fn for_each_covered_pixel(
    verts: [Point; 3],
    width: usize,
    height: usize,
    mut f: impl FnMut(usize, usize),
) {
    let verts = if robust::orient2d(verts[0].coord(), verts[1].coord(), verts[2].coord()) < 0.0 {
        [verts[0], verts[2], verts[1]]
    } else {
        verts
    };
    let min_x = verts.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
    let max_x = verts.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = verts.iter().map(|v| v.y).fold(f64::INFINITY, f64::min);
    let max_y = verts.iter().map(|v| v.y).fold(f64::NEG_INFINITY, f64::max);
    let x0 = ((min_x - 0.5).floor().max(0.0)) as usize;
    let y0 = ((min_y - 0.5).floor().max(0.0)) as usize;
    let x1 = ((max_x - 0.5).ceil().max(0.0) as usize).min(width.saturating_sub(1));
    let y1 = ((max_y - 0.5).ceil().max(0.0) as usize).min(height.saturating_sub(1));
    let owns = |u: Point, v: Point| v.y < u.y || (v.y == u.y && v.x > u.x);
    let edges = [(verts[0], verts[1]), (verts[1], verts[2]), (verts[2], verts[0])];
    for y in y0..=y1 {
        for x in x0..=x1 {
            let c = robust::Coord {
                x: x as f64 + 0.5,
                y: y as f64 + 0.5,
            };
            let inside = edges.iter().all(|&(u, v)| {
                let o = robust::orient2d(u.coord(), v.coord(), c);
                o > 0.0 || (o == 0.0 && owns(u, v))
            });
            if inside {
                f(x, y);
            }
        }
    }
}
