//! Poisson seamless cloning with a conjugate-gradient solver.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imagekit::{Image, Point};
use crate::scalar::Real;

/// Binary region mask. The inside region never touches the image border.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloneMask {
    width: usize,
    height: usize,
    inside: Vec<bool>,
}

impl CloneMask {
    pub fn new(width: usize, height: usize, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != width * height {
            return Err(Error::Shape(format!(
                "mask {width}x{height} needs {} flags",
                width * height
            )));
        }
        for y in 0..height {
            for x in 0..width {
                let border = x == 0 || y == 0 || x + 1 == width || y + 1 == height;
                if border && inside[y * width + x] {
                    return Err(Error::InvalidArgument(format!(
                        "mask touches the border at ({x}, {y})"
                    )));
                }
            }
        }
        Ok(Self {
            width,
            height,
            inside,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_inside(&self, x: usize, y: usize) -> bool {
        self.inside[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Pixels whose centers lie in the convex hull of `points`, eroded by
    /// `erode` pixels (square structuring element), with the border ring
    /// cleared.
    pub fn from_hull(width: usize, height: usize, points: &[Point], erode: usize) -> Result<Self> {
        let hull = convex_hull(points);
        let mut inside = vec![false; width * height];
        if hull.len() >= 3 {
            for y in 0..height {
                for x in 0..width {
                    inside[y * width + x] = in_convex(&hull, Point::new(x as f64, y as f64));
                }
            }
        }
        let mut mask = erode_square(width, height, &inside, erode);
        for y in 0..height {
            for x in 0..width {
                if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                    mask[y * width + x] = false;
                }
            }
        }
        Self::new(width, height, mask)
    }

    /// Grayscale PGM: 0 outside, 255 inside.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.inside.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }

    /// Reads a PGM written by [`CloneMask::save_pgm`]; samples ≥ 128 are inside.
    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let img: Image<f64> = crate::imagekit::load_image(path)?;
        if img.channels() != 1 {
            return Err(Error::Shape("clone mask must be single-channel".into()));
        }
        let inside = img.data().iter().map(|&v| v >= 0.5).collect();
        Self::new(img.width(), img.height(), inside)
    }
}

fn erode_square(w: usize, h: usize, inside: &[bool], r: usize) -> Vec<bool> {
    if r == 0 {
        return inside.to_vec();
    }
    let r = r as isize;
    let mut out = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut keep = true;
            'win: for dy in -r..=r {
                for dx in -r..=r {
                    let (sx, sy) = (x + dx, y + dy);
                    if sx < 0
                        || sy < 0
                        || sx >= w as isize
                        || sy >= h as isize
                        || !inside[(sy * w as isize + sx) as usize]
                    {
                        keep = false;
                        break 'win;
                    }
                }
            }
            out[(y * w as isize + x) as usize] = keep;
        }
    }
    out
}

/// Andrew's monotone chain; returns the hull with positive orientation.
pub(crate) fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross =
        |o: Point, a: Point, b: Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn in_convex(hull: &[Point], p: Point) -> bool {
    (0..hull.len()).all(|i| {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PoissonConfig {
    /// Stop when the residual 2-norm drops below `rel_tol` × initial residual.
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iters: 10_000,
        }
    }
}

/// Poisson blend of `src` into `dst` over `mask`.
pub fn seamless_clone<T: Real>(
    src: &Image<T>,
    dst: &Image<T>,
    mask: &CloneMask,
) -> Result<Image<T>> {
    seamless_clone_with(src, dst, mask, &PoissonConfig::default())
}

pub fn seamless_clone_with<T: Real>(
    src: &Image<T>,
    dst: &Image<T>,
    mask: &CloneMask,
    cfg: &PoissonConfig,
) -> Result<Image<T>> {
    src.ensure_same_shape(dst, "seamless_clone")?;
    if mask.width != dst.width() || mask.height != dst.height() {
        return Err(Error::Shape("mask and image sizes differ".into()));
    }
    let w = dst.width();
    let unknowns: Vec<usize> = (0..w * dst.height()).filter(|&i| mask.inside[i]).collect();
    let mut out = dst.clone();
    if unknowns.is_empty() {
        return Ok(out);
    }
    let mut index = vec![usize::MAX; w * dst.height()];
    for (k, &i) in unknowns.iter().enumerate() {
        index[i] = k;
    }
    let neighbors = |i: usize| [i - 1, i + 1, i - w, i + w];

    for c in 0..dst.channels() {
        let s: Vec<f64> = src.plane(c).iter().map(|v| v.as_f64()).collect();
        let d: Vec<f64> = dst.plane(c).iter().map(|v| v.as_f64()).collect();
        let rhs: Vec<f64> = unknowns
            .iter()
            .map(|&i| {
                neighbors(i)
                    .iter()
                    .map(|&q| {
                        let guide = s[i] - s[q];
                        if index[q] == usize::MAX {
                            guide + d[q]
                        } else {
                            guide
                        }
                    })
                    .sum()
            })
            .collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for (k, &i) in unknowns.iter().enumerate() {
                let mut acc = 4.0 * x[k];
                for q in neighbors(i) {
                    if index[q] != usize::MAX {
                        acc -= x[index[q]];
                    }
                }
                y[k] = acc;
            }
        };
        let x0: Vec<f64> = unknowns.iter().map(|&i| d[i]).collect();
        let x = conjugate_gradient(apply, &rhs, x0, cfg)?;
        let plane = out.plane_mut(c);
        for (k, &i) in unknowns.iter().enumerate() {
            plane[i] = T::lit(x[k].clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Plain CG for a symmetric positive-definite operator.
fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    mut x: Vec<f64>,
    cfg: &PoissonConfig,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut rr = dot(&r, &r);
    let r0 = rr.sqrt();
    // Below this the residual is rounding noise of the right-hand side.
    let floor = 1e-15 * dot(b, b).sqrt();
    let target = (cfg.rel_tol * r0).max(floor);
    if r0 <= floor {
        return Ok(x);
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for _ in 0..cfg.max_iters {
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() < target {
            return Ok(x);
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        residual: rr.sqrt(),
        iterations: cfg.max_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_mask(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> CloneMask {
        let inside = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                x >= x0 && x <= x1 && y >= y0 && y <= y1
            })
            .collect();
        CloneMask::new(w, h, inside).unwrap()
    }

    fn random_image(seed: u64, w: usize, h: usize, c: usize) -> Image<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, c, |_, _, _| rng.gen()).unwrap()
    }

    /// Dense Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    #[test]
    fn border_touching_mask_rejected() {
        let mut inside = vec![false; 9];
        inside[3] = true;
        assert!(CloneMask::new(3, 3, inside).is_err());
    }

    #[test]
    fn self_clone_is_identity() {
        let img = random_image(5, 20, 16, 3);
        let mask = square_mask(20, 16, 3, 3, 15, 11);
        let out = seamless_clone(&img, &img, &mask).unwrap();
        assert!(out.max_abs_diff(&img) < 1e-3);
    }

    #[test]
    fn constant_into_constant_takes_destination_level() {
        let src = Image::<f64>::filled(12, 12, 1, 0.8).unwrap();
        let dst = Image::<f64>::filled(12, 12, 1, 0.3).unwrap();
        let out = seamless_clone(&src, &dst, &square_mask(12, 12, 2, 2, 9, 9)).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.3).abs() < 1e-3));
    }

    #[test]
    fn matches_dense_direct_solve() {
        // Smooth images keep the solution inside [0, 1] so clamping is inert.
        let src = Image::<f64>::from_fn(5, 5, 1, |_, x, y| {
            0.4 + 0.05 * x as f64 - 0.03 * (y * y) as f64 / 4.0
        })
        .unwrap();
        let dst = Image::<f64>::from_fn(5, 5, 1, |_, x, y| 0.5 + 0.04 * y as f64 - 0.02 * x as f64)
            .unwrap();
        let mask = square_mask(5, 5, 1, 1, 3, 3);
        let out = seamless_clone(&src, &dst, &mask).unwrap();

        let cells: Vec<(usize, usize)> = (1..4).flat_map(|y| (1..4).map(move |x| (x, y))).collect();
        let idx = |x: usize, y: usize| cells.iter().position(|&c| c == (x, y));
        let mut a = vec![vec![0.0; 9]; 9];
        let mut b = vec![0.0; 9];
        for (k, &(x, y)) in cells.iter().enumerate() {
            a[k][k] = 4.0;
            for (nx, ny) in [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)] {
                b[k] += src.get(0, x, y) - src.get(0, nx, ny);
                match idx(nx, ny) {
                    Some(j) => a[k][j] = -1.0,
                    None => b[k] += dst.get(0, nx, ny),
                }
            }
        }
        let exact = dense_solve(a, b);
        for (k, &(x, y)) in cells.iter().enumerate() {
            assert!((out.get(0, x, y) - exact[k]).abs() < 1e-6, "cell {k}");
        }
    }

    #[test]
    fn outside_pixels_are_untouched() {
        let src = random_image(1, 16, 16, 3);
        let dst = random_image(2, 16, 16, 3);
        let mask = square_mask(16, 16, 4, 5, 10, 12);
        let out = seamless_clone(&src, &dst, &mask).unwrap();
        for c in 0..3 {
            for y in 0..16 {
                for x in 0..16 {
                    if !mask.is_inside(x, y) {
                        assert_eq!(out.get(c, x, y).to_bits(), dst.get(c, x, y).to_bits());
                    }
                }
            }
        }
        assert!(out.is_displayable());
    }

    #[test]
    fn non_convergence_reports_residual() {
        let src = random_image(1, 30, 30, 1);
        let dst = random_image(2, 30, 30, 1);
        let cfg = PoissonConfig {
            rel_tol: 1e-8,
            max_iters: 2,
        };
        let err =
            seamless_clone_with(&src, &dst, &square_mask(30, 30, 2, 2, 27, 27), &cfg).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 2, residual } if residual > 0.0));
    }

    #[test]
    fn hull_mask_and_pgm_round_trip() {
        let pts = [
            Point::new(5.0, 5.0),
            Point::new(25.0, 6.0),
            Point::new(15.0, 25.0),
        ];
        let mask = CloneMask::from_hull(32, 32, &pts, 2).unwrap();
        let unshrunk = CloneMask::from_hull(32, 32, &pts, 0).unwrap();
        assert!(mask.count() > 0 && mask.count() < unshrunk.count());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        mask.save_pgm(&p).unwrap();
        assert_eq!(CloneMask::load_pgm(&p).unwrap(), mask);
    }
}
