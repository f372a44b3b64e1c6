//! Bowyer–Watson Delaunay triangulation over landmarks plus a fixed frame.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::imagekit::{LandmarkSet, Point};

/// Minimum accepted triangle area in px².
pub const MIN_TRIANGLE_AREA: f64 = 1e-9;
const COCIRCULAR_REL_TOL: f64 = 1e-9;
const DUPLICATE_TOL: f64 = 1e-9;

/// Triangulated vertex set. Vertices `0..landmark_names.len()` are the
/// landmarks in name order, followed by the auxiliary frame points (four
/// corners, then four edge midpoints).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    /// Positively oriented (counter-clockwise in the usual y-up sense of the
    /// cross product).
    pub triangles: Vec<[usize; 3]>,
    pub landmark_names: Vec<String>,
}

impl TriangleMesh {
    /// Validates explicit vertex/triangle lists.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        landmark_names: Vec<String>,
    ) -> Result<Self> {
        for t in &triangles {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t:?} references a missing vertex"
                )));
            }
            let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area <= MIN_TRIANGLE_AREA {
                return Err(Error::Degenerate(format!(
                    "triangle {t:?} has signed area {area}"
                )));
            }
        }
        if landmark_names.len() > vertices.len() {
            return Err(Error::InvalidArgument(
                "more landmark names than vertices".into(),
            ));
        }
        Ok(Self {
            vertices,
            triangles,
            landmark_names,
        })
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Circumcircle `(center, radius²)` of triangle `t`.
    pub fn circumcircle(&self, t: usize) -> (Point, f64) {
        let [a, b, c] = self.triangles[t];
        circumcircle(self.vertices[a], self.vertices[b], self.vertices[c])
    }
}

/// Half the cross product `(b - a) × (c - a)`.
pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn circumcircle(a: Point, b: Point, c: Point) -> (Point, f64) {
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    (Point::new(a.x + ux, a.y + uy), ux * ux + uy * uy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Circle {
    Inside,
    On,
    Outside,
}

/// Where `d` lies relative to the circumcircle of the positively oriented
/// triangle `abc`. Uses the in-circle determinant, with a tolerance scaled by
/// its permanent so that slivers with huge circumcircles stay consistent.
fn classify(a: Point, b: Point, c: Point, d: Point) -> Circle {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let (al, bl, cl) = (
        adx * adx + ady * ady,
        bdx * bdx + bdy * bdy,
        cdx * cdx + cdy * cdy,
    );
    let det =
        al * (bdx * cdy - bdy * cdx) + bl * (cdx * ady - cdy * adx) + cl * (adx * bdy - ady * bdx);
    let permanent = al * ((bdx * cdy).abs() + (bdy * cdx).abs())
        + bl * ((cdx * ady).abs() + (cdy * adx).abs())
        + cl * ((adx * bdy).abs() + (ady * bdx).abs());
    let tol = COCIRCULAR_REL_TOL * permanent;
    if det > tol {
        Circle::Inside
    } else if det >= -tol {
        Circle::On
    } else {
        Circle::Outside
    }
}

/// The eight auxiliary frame points for a `width`×`height` raster: corners
/// then edge midpoints, spanning the pixel-center rectangle.
pub fn frame_points(width: usize, height: usize) -> [Point; 8] {
    let (w, h) = ((width.max(1) - 1) as f64, (height.max(1) - 1) as f64);
    [
        Point::new(0.0, 0.0),
        Point::new(w, 0.0),
        Point::new(w, h),
        Point::new(0.0, h),
        Point::new(0.5 * w, 0.0),
        Point::new(w, 0.5 * h),
        Point::new(0.5 * w, h),
        Point::new(0.0, 0.5 * h),
    ]
}

/// Delaunay triangulation of `lm` ∪ frame points.
///
/// Insertion is lexicographic in `(x, y)`; among cocircular configurations
/// the diagonal touching the lowest vertex index is kept.
pub fn delaunay_triangulate(lm: &LandmarkSet, width: usize, height: usize) -> Result<TriangleMesh> {
    if width < 2 || height < 2 {
        return Err(Error::Degenerate(format!(
            "{width}x{height} frame: all points collinear"
        )));
    }
    if !lm.within(width, height) {
        return Err(Error::InvalidArgument(
            "landmarks must lie inside the image frame".into(),
        ));
    }
    let landmark_names: Vec<String> = lm.names().map(str::to_string).collect();
    let mut vertices: Vec<Point> = lm.points().collect();
    let frame_start = vertices.len();
    vertices.extend(frame_points(width, height));

    let corners = [
        frame_start,
        frame_start + 1,
        frame_start + 2,
        frame_start + 3,
    ];
    // Seed with the frame rectangle; every other vertex lies inside it.
    let mut tris: Vec<[usize; 3]> = vec![
        [corners[0], corners[1], corners[2]],
        [corners[0], corners[2], corners[3]],
    ];
    let mut order: Vec<usize> = (0..vertices.len())
        .filter(|i| !corners.contains(i))
        .collect();
    order.sort_by(|&i, &j| {
        let (p, q) = (vertices[i], vertices[j]);
        p.x.total_cmp(&q.x)
            .then(p.y.total_cmp(&q.y))
            .then(i.cmp(&j))
    });

    let mut inserted: Vec<usize> = corners.to_vec();
    for idx in order {
        let p = vertices[idx];
        let dup = inserted.iter().any(|&j| {
            let q = vertices[j];
            (p.x - q.x).abs() <= DUPLICATE_TOL && (p.y - q.y).abs() <= DUPLICATE_TOL
        });
        if dup {
            continue;
        }
        insert_point(&vertices, &mut tris, idx)?;
        inserted.push(idx);
    }

    flip_cocircular(&vertices, &mut tris);
    tris.sort_by_key(|t| canonical(*t));
    let tris = tris.into_iter().map(canonical).collect();
    TriangleMesh::new(vertices, tris, landmark_names)
}

/// Rotates the vertex triple so the lowest index comes first (orientation kept).
fn canonical(t: [usize; 3]) -> [usize; 3] {
    let k = (0..3).min_by_key(|&k| t[k]).unwrap();
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}

fn insert_point(vertices: &[Point], tris: &mut Vec<[usize; 3]>, idx: usize) -> Result<()> {
    let p = vertices[idx];
    let mut bad = Vec::new();
    for (ti, t) in tris.iter().enumerate() {
        if classify(vertices[t[0]], vertices[t[1]], vertices[t[2]], p) == Circle::Inside {
            bad.push(ti);
        }
    }
    if bad.is_empty() {
        return Err(Error::Internal(format!(
            "vertex {idx} at {p:?} lies in no circumcircle"
        )));
    }
    // Cavity boundary: directed edges of bad triangles without a bad twin.
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for &ti in &bad {
        let t = tris[ti];
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut boundary = Vec::new();
    for &ti in &bad {
        let t = tris[ti];
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if edge_count[&(a.min(b), a.max(b))] == 1 {
                boundary.push((a, b));
            }
        }
    }
    let mut keep: Vec<[usize; 3]> = tris
        .iter()
        .enumerate()
        .filter(|(ti, _)| !bad.contains(ti))
        .map(|(_, t)| *t)
        .collect();
    for (a, b) in boundary {
        // An edge collinear with `p` is a frame edge the point splits.
        if signed_area(vertices[a], vertices[b], p) <= MIN_TRIANGLE_AREA {
            continue;
        }
        keep.push([a, b, idx]);
    }
    *tris = keep;
    Ok(())
}

/// Flips shared edges whose quadrilateral is cocircular so that the kept
/// diagonal touches the lowest vertex index among the four corners.
fn flip_cocircular(vertices: &[Point], tris: &mut [[usize; 3]]) {
    for _ in 0..(4 * tris.len() + 8) {
        let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (ti, t) in tris.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges
                    .entry((a.min(b), a.max(b)))
                    .or_default()
                    .push((ti, (k + 2) % 3));
            }
        }
        let mut keys: Vec<_> = edges.keys().copied().collect();
        keys.sort_unstable();
        let mut flipped = false;
        for key in keys {
            let sides = &edges[&key];
            if sides.len() != 2 {
                continue;
            }
            let (t1, k1) = sides[0];
            let (t2, k2) = sides[1];
            let (c, d) = (tris[t1][k1], tris[t2][k2]);
            let (a, b) = key;
            let tri = tris[t1];
            let flip = match classify(
                vertices[tri[0]],
                vertices[tri[1]],
                vertices[tri[2]],
                vertices[d],
            ) {
                Circle::Inside => true,
                Circle::On => c.min(d) < a.min(b),
                Circle::Outside => false,
            };
            if !flip {
                continue;
            }
            // New triangles on either side of the diagonal c-d.
            let mut n1 = [c, d, a];
            let mut n2 = [d, c, b];
            for n in [&mut n1, &mut n2] {
                if signed_area(vertices[n[0]], vertices[n[1]], vertices[n[2]]) < 0.0 {
                    n.swap(0, 1);
                }
            }
            let ok = [n1, n2].iter().all(|n| {
                signed_area(vertices[n[0]], vertices[n[1]], vertices[n[2]]) > MIN_TRIANGLE_AREA
            });
            if !ok {
                continue;
            }
            tris[t1] = n1;
            tris[t2] = n2;
            flipped = true;
            break;
        }
        if !flipped {
            return;
        }
    }
}
