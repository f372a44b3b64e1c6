use super::landmarks::{BROW_PREFIX, EYE_LEFT, EYE_RIGHT, MOUTH_PREFIX};
use super::{Image, LandmarkSet, Point};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Side length of the normalized face crop.
pub const FACE_CROP_SIZE: usize = 224;

/// Rotation about `center` by `angle` radians (counter-clockwise in a
/// y-up frame, clockwise on screen).
#[derive(Debug, Clone, Copy)]
struct Rotation {
    center: Point,
    cos: f64,
    sin: f64,
    identity: bool,
}

impl Rotation {
    fn new(center: Point, angle: f64) -> Self {
        Self {
            center,
            cos: angle.cos(),
            sin: angle.sin(),
            identity: angle == 0.0,
        }
    }

    fn apply(&self, p: Point) -> Point {
        if self.identity {
            return p;
        }
        let (dx, dy) = (p.x - self.center.x, p.y - self.center.y);
        Point::new(
            self.center.x + dx * self.cos - dy * self.sin,
            self.center.y + dx * self.sin + dy * self.cos,
        )
    }

    fn inverse(&self) -> Self {
        Self {
            sin: -self.sin,
            ..*self
        }
    }
}

/// Aligns a face: levels the eye line, crops the brow/mouth bounding box and
/// scales it to 224×224.
pub fn normalize_face<T: Real>(
    img: &Image<T>,
    lm: &LandmarkSet,
) -> Result<(Image<T>, LandmarkSet)> {
    normalize_face_to(img, lm, FACE_CROP_SIZE)
}

/// [`normalize_face`] with an explicit output side length.
pub fn normalize_face_to<T: Real>(
    img: &Image<T>,
    lm: &LandmarkSet,
    size: usize,
) -> Result<(Image<T>, LandmarkSet)> {
    if size == 0 {
        return Err(Error::InvalidArgument("crop size must be positive".into()));
    }
    lm.validate_for_normalization()?;
    let (el, er) = (lm.require(EYE_LEFT)?, lm.require(EYE_RIGHT)?);
    let center = Point::new(0.5 * (el.x + er.x), 0.5 * (el.y + er.y));
    let tilt = (er.y - el.y).atan2(er.x - el.x);
    // `to_level` maps input coordinates into the eye-levelled frame.
    let to_level = Rotation::new(center, -tilt);
    let from_level = to_level.inverse();

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in lm
        .with_prefix(BROW_PREFIX)
        .chain(lm.with_prefix(MOUTH_PREFIX))
    {
        let q = to_level.apply(p);
        x_min = x_min.min(q.x);
        x_max = x_max.max(q.x);
        y_min = y_min.min(q.y);
        y_max = y_max.max(q.y);
    }
    if !(x_max - x_min > 0.0 && y_max - y_min > 0.0) {
        return Err(Error::Degenerate(format!(
            "brow/mouth bounding box is {}x{}",
            x_max - x_min,
            y_max - y_min
        )));
    }
    // The box spans whole pixels: its outer edges lie half a pixel beyond
    // the extreme landmark centers.
    let (x0, y0) = (x_min - 0.5, y_min - 0.5);
    let (sx, sy) = (
        (x_max - x_min + 1.0) / size as f64,
        (y_max - y_min + 1.0) / size as f64,
    );

    let out = Image::from_fn(size, size, img.channels(), |c, u, v| {
        let level = Point::new((u as f64 + 0.5) * sx + x0, (v as f64 + 0.5) * sy + y0);
        let src = from_level.apply(level);
        img.sample_bilinear(c, src.x, src.y)
    })?;
    let out_lm = lm.map(|p| {
        let q = to_level.apply(p);
        Point::new((q.x - x0) / sx - 0.5, (q.y - y0) / sy - 0.5)
    });
    Ok((out, out_lm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagekit::resize_bilinear;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn face_landmarks(pairs: &[(&str, f64, f64)]) -> LandmarkSet {
        pairs
            .iter()
            .map(|&(n, x, y)| (n.to_string(), Point::new(x, y)))
            .collect()
    }

    #[test]
    fn level_eyes_full_box_is_pure_resize() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Image::<f64>::from_fn(40, 30, 3, |_, _, _| rng.gen()).unwrap();
        let lm = face_landmarks(&[
            ("eye_left", 12.0, 10.0),
            ("eye_right", 28.0, 10.0),
            ("brow_l", 0.0, 0.0),
            ("mouth_r", 39.0, 29.0),
        ]);
        let (out, out_lm) = normalize_face(&img, &lm).unwrap();
        let expected = resize_bilinear(&img, 224, 224).unwrap();
        assert_eq!(out.width(), 224);
        assert!(out.max_abs_diff(&expected) < 1e-12);
        let brow = out_lm.get("brow_l").unwrap();
        // pixel 0 center maps to -0.5 + 0.5*40/224
        assert!((brow.x - (0.5 * 224.0 / 40.0 - 0.5)).abs() < 1e-9);
    }

    #[test]
    fn diagonal_eyes_are_levelled() {
        let img = Image::<f64>::filled(40, 40, 1, 0.5).unwrap();
        let lm = face_landmarks(&[
            ("eye_left", 10.0, 10.0),
            ("eye_right", 20.0, 20.0),
            ("brow_a", 8.0, 4.0),
            ("brow_b", 22.0, 12.0),
            ("mouth_a", 10.0, 30.0),
            ("mouth_b", 20.0, 33.0),
        ]);
        let (_, out_lm) = normalize_face(&img, &lm).unwrap();
        let (l, r) = (
            out_lm.get("eye_left").unwrap(),
            out_lm.get("eye_right").unwrap(),
        );
        assert!((l.y - r.y).abs() < 1e-6, "{l:?} {r:?}");
        assert!(r.x > l.x);
    }

    #[test]
    fn rotation_maps_image_content_with_landmarks() {
        // A bright dot at a landmark must land at that landmark's output position.
        let dot = Point::new(25.0, 14.0);
        let img = Image::<f64>::from_fn(48, 48, 1, |_, x, y| {
            let d2 = (x as f64 - dot.x).powi(2) + (y as f64 - dot.y).powi(2);
            (-d2 / 8.0).exp()
        })
        .unwrap();
        let lm = face_landmarks(&[
            ("eye_left", 12.0, 18.0),
            ("eye_right", 30.0, 12.0),
            ("brow_a", 10.0, 8.0),
            ("brow_b", 32.0, 4.0),
            ("mouth_a", 16.0, 38.0),
            ("mouth_b", 30.0, 36.0),
            ("dot", dot.x, dot.y),
        ]);
        let (out, out_lm) = normalize_face_to(&img, &lm, 96).unwrap();
        let p = out_lm.get("dot").unwrap();
        let (mut best, mut at) = (f64::MIN, (0, 0));
        for y in 0..96 {
            for x in 0..96 {
                if out.get(0, x, y) > best {
                    best = out.get(0, x, y);
                    at = (x, y);
                }
            }
        }
        assert!(
            (at.0 as f64 - p.x).abs() <= 1.5 && (at.1 as f64 - p.y).abs() <= 1.5,
            "{at:?} vs {p:?}"
        );
    }

    #[test]
    fn missing_mouth_or_flat_box() {
        let img = Image::<f64>::filled(10, 10, 1, 0.0).unwrap();
        let lm = face_landmarks(&[
            ("eye_left", 2.0, 2.0),
            ("eye_right", 6.0, 2.0),
            ("brow_a", 1.0, 1.0),
        ]);
        assert!(matches!(
            normalize_face(&img, &lm),
            Err(Error::MissingLandmark(_))
        ));
        let flat = face_landmarks(&[
            ("eye_left", 2.0, 2.0),
            ("eye_right", 6.0, 2.0),
            ("brow_a", 1.0, 1.0),
            ("mouth_a", 1.0, 8.0),
        ]);
        assert!(matches!(
            normalize_face(&img, &flat),
            Err(Error::Degenerate(_))
        ));
    }
}
