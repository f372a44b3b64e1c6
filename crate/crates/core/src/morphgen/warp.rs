use super::delaunay::{frame_points, signed_area, TriangleMesh};
use crate::error::{Error, Result};
use crate::imagekit::{Image, LandmarkSet, Point};
use crate::scalar::Real;

/// Per-point `(1 − alpha)·a + alpha·b`.
pub fn average_landmarks(a: &LandmarkSet, b: &LandmarkSet, alpha: f64) -> Result<LandmarkSet> {
    check_alpha(alpha)?;
    if !a.same_names(b) {
        return Err(Error::InvalidArgument("landmark name sets differ".into()));
    }
    Ok(a.iter()
        .zip(b.points())
        .map(|((name, p), q)| (name.to_string(), p.lerp(q, alpha)))
        .collect())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0, 1]"
        )))
    }
}

/// Per-sample `(1 − alpha)·a + alpha·b`.
pub fn blend<T: Real>(a: &Image<T>, b: &Image<T>, alpha: f64) -> Result<Image<T>> {
    check_alpha(alpha)?;
    a.ensure_same_shape(b, "blend")?;
    let (wa, wb) = (T::lit(1.0 - alpha), T::lit(alpha));
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&p, &q)| wa * p + wb * q)
        .collect();
    a.with_data(data)
}

/// Warps `img` from the `src` geometry into the `dst` geometry using a mesh
/// built over `dst` (see [`super::delaunay_triangulate`]).
pub fn warp_piecewise_affine<T: Real>(
    img: &Image<T>,
    src: &LandmarkSet,
    dst: &LandmarkSet,
    mesh: &TriangleMesh,
) -> Result<Image<T>> {
    if !src.same_names(dst) {
        return Err(Error::InvalidArgument(
            "src/dst landmark names differ".into(),
        ));
    }
    let n = mesh.landmark_names.len();
    if mesh.vertices.len() != n + 8 {
        return Err(Error::InvalidArgument(
            "mesh was not built over landmarks plus frame".into(),
        ));
    }
    let mut src_vertices = Vec::with_capacity(mesh.vertices.len());
    for name in &mesh.landmark_names {
        src_vertices.push(src.require(name)?);
    }
    src_vertices.extend(frame_points(img.width(), img.height()));
    warp_mesh(img, mesh, &src_vertices)
}

/// Maps each output pixel through its mesh triangle into `src_vertices`
/// space and samples `img` bilinearly (replicate border).
pub fn warp_mesh<T: Real>(
    img: &Image<T>,
    mesh: &TriangleMesh,
    src_vertices: &[Point],
) -> Result<Image<T>> {
    if src_vertices.len() != mesh.vertices.len() {
        return Err(Error::Shape(format!(
            "{} source vertices for a {}-vertex mesh",
            src_vertices.len(),
            mesh.vertices.len()
        )));
    }
    let (w, h) = (img.width(), img.height());
    let owner = locate_pixels(mesh, w, h)?;
    // Per-pixel source coordinates, shared by all channels.
    let mut coords = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let t = mesh.triangles[owner[y * w + x]];
            let p = Point::new(x as f64, y as f64);
            let (l0, l1, l2) = barycentric(
                mesh.vertices[t[0]],
                mesh.vertices[t[1]],
                mesh.vertices[t[2]],
                p,
            );
            let (a, b, c) = (src_vertices[t[0]], src_vertices[t[1]], src_vertices[t[2]]);
            coords.push((
                l0 * a.x + l1 * b.x + l2 * c.x,
                l0 * a.y + l1 * b.y + l2 * c.y,
            ));
        }
    }
    Image::from_fn(w, h, img.channels(), |c, x, y| {
        let (sx, sy) = coords[y * w + x];
        img.sample_bilinear(c, sx, sy)
    })
}

fn barycentric(a: Point, b: Point, c: Point, p: Point) -> (f64, f64, f64) {
    let total = signed_area(a, b, c);
    let l0 = signed_area(p, b, c) / total;
    let l1 = signed_area(a, p, c) / total;
    (l0, l1, 1.0 - l0 - l1)
}

/// Index of the first triangle (in mesh order) containing each pixel center.
fn locate_pixels(mesh: &TriangleMesh, w: usize, h: usize) -> Result<Vec<usize>> {
    const UNSET: usize = usize::MAX;
    let mut owner = vec![UNSET; w * h];
    for (ti, t) in mesh.triangles.iter().enumerate() {
        let (a, b, c) = (
            mesh.vertices[t[0]],
            mesh.vertices[t[1]],
            mesh.vertices[t[2]],
        );
        let x0 = a.x.min(b.x).min(c.x).floor().max(0.0) as usize;
        let y0 = a.y.min(b.y).min(c.y).floor().max(0.0) as usize;
        let x1 = (a.x.max(b.x).max(c.x).ceil() as usize).min(w - 1);
        let y1 = (a.y.max(b.y).max(c.y).ceil() as usize).min(h - 1);
        let eps = -1e-9;
        for y in y0..=y1 {
            for x in x0..=x1 {
                if owner[y * w + x] != UNSET {
                    continue;
                }
                let (l0, l1, l2) = barycentric(a, b, c, Point::new(x as f64, y as f64));
                if l0 >= eps && l1 >= eps && l2 >= eps {
                    owner[y * w + x] = ti;
                }
            }
        }
    }
    if let Some(i) = owner.iter().position(|&o| o == UNSET) {
        return Err(Error::Internal(format!(
            "pixel ({}, {}) lies outside every triangle",
            i % w,
            i / w
        )));
    }
    Ok(owner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphgen::delaunay_triangulate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, w: usize, h: usize, c: usize) -> Image<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, c, |_, _, _| rng.gen()).unwrap()
    }

    fn lm(pts: &[(&str, f64, f64)]) -> LandmarkSet {
        pts.iter()
            .map(|&(n, x, y)| (n.to_string(), Point::new(x, y)))
            .collect()
    }

    #[test]
    fn average_examples() {
        let a = lm(&[("p", 0.0, 0.0)]);
        let b = lm(&[("p", 10.0, 20.0)]);
        assert_eq!(
            average_landmarks(&a, &b, 0.5).unwrap().get("p"),
            Some(Point::new(5.0, 10.0))
        );
        assert_eq!(average_landmarks(&a, &b, 0.0).unwrap(), a);
        assert_eq!(average_landmarks(&b, &b, 0.3).unwrap(), b);
        assert!(average_landmarks(&a, &lm(&[("q", 1.0, 1.0)]), 0.5).is_err());
    }

    #[test]
    fn blend_examples() {
        let a = Image::<f64>::filled(2, 2, 1, 0.2).unwrap();
        let b = Image::<f64>::filled(2, 2, 1, 0.6).unwrap();
        assert!(blend(&a, &b, 0.5)
            .unwrap()
            .data()
            .iter()
            .all(|v| (v - 0.4).abs() < 1e-15));
        assert_eq!(blend(&a, &a, 0.7).unwrap().max_abs_diff(&a), 0.0);
        assert!(blend(&a, &Image::filled(2, 3, 1, 0.0).unwrap(), 0.5).is_err());
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = Image::<f64>::filled(30, 20, 3, 0.37).unwrap();
        let src = lm(&[("a", 10.0, 5.0), ("b", 20.0, 12.0)]);
        let dst = lm(&[("a", 12.0, 7.0), ("b", 17.0, 10.0)]);
        let mesh = delaunay_triangulate(&dst, 30, 20).unwrap();
        let out = warp_piecewise_affine(&img, &src, &dst, &mesh).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn hand_computed_affine_probe() {
        // Two triangles covering a 9x9 frame; source vertices are the
        // destination shifted by (+1.5, +0.5) except the far corner, which
        // keeps the map affine only on the first triangle.
        let dst = vec![
            Point::new(0.0, 0.0),
            Point::new(8.0, 0.0),
            Point::new(8.0, 8.0),
            Point::new(0.0, 8.0),
        ];
        let mesh = TriangleMesh::new(dst, vec![[0, 1, 2], [0, 2, 3]], vec![]).unwrap();
        let src = vec![
            Point::new(1.5, 0.5),
            Point::new(9.5, 0.5),
            Point::new(9.5, 8.5),
            Point::new(0.0, 8.0),
        ];
        let img = Image::<f64>::from_fn(12, 12, 1, |_, x, y| (x * 12 + y) as f64 / 144.0).unwrap();
        let out = warp_mesh(&img, &mesh, &src).unwrap_err();
        // The 12x12 image is larger than the 9x9 mesh.
        assert!(matches!(out, Error::Internal(_)));

        let img = Image::<f64>::from_fn(9, 9, 1, |_, x, y| (x * 9 + y) as f64 / 81.0).unwrap();
        let out = warp_mesh(&img, &mesh, &src).unwrap();
        // Pixel (6, 2) is in triangle [0,1,2]; the map there is p + (1.5, 0.5),
        // so it samples (7.5, 2.5): the mean of (7,2), (8,2), (7,3), (8,3).
        let expected = ((7 * 9 + 2) + (8 * 9 + 2) + (7 * 9 + 3) + (8 * 9 + 3)) as f64 / 4.0 / 81.0;
        assert!((out.get(0, 6, 2) - expected).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn identity_warp(
            seed in any::<u64>(),
            pts in proptest::collection::vec((0.0f64..39.0, 0.0f64..29.0), 0..12)
        ) {
            let img = random_image(seed, 40, 30, 3);
            let set: LandmarkSet = pts.iter().enumerate()
                .map(|(i, &(x, y))| (format!("l{i:02}"), Point::new(x, y))).collect();
            let mesh = delaunay_triangulate(&set, 40, 30).unwrap();
            let out = warp_piecewise_affine(&img, &set, &set, &mesh).unwrap();
            prop_assert!(out.max_abs_diff(&img) < 1e-6);
        }

        #[test]
        fn blend_is_convex(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
            let a = random_image(seed, 5, 5, 1);
            let b = random_image(seed.wrapping_add(1), 5, 5, 1);
            prop_assert!(blend(&a, &b, alpha).unwrap().is_displayable());
        }
    }
}
