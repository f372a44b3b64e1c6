//! Morph construction: averaged geometry, piecewise-affine warping, blending
//! and Poisson seamless cloning.

mod clone;
mod delaunay;
mod warp;

pub use self::clone::{seamless_clone, seamless_clone_with, CloneMask, PoissonConfig};
pub use self::delaunay::{delaunay_triangulate, frame_points, TriangleMesh, MIN_TRIANGLE_AREA};
pub use self::warp::{average_landmarks, blend, warp_mesh, warp_piecewise_affine};

use crate::error::{Error, Result};
use crate::imagekit::{Image, LandmarkSet, Point};
use crate::scalar::Real;

/// Morphing factor used for both geometry and blending.
pub const DEFAULT_ALPHA: f64 = 0.5;
/// Erosion applied to the landmark hull before cloning.
pub const CLONE_ERODE_PX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CloneInto {
    #[default]
    None,
    A,
    B,
}

/// Intermediate products of [`make_simple_morph`].
#[derive(Debug, Clone)]
pub struct MorphParts<T: Real> {
    pub landmarks: LandmarkSet,
    pub warped_a: Image<T>,
    pub warped_b: Image<T>,
    pub blended: Image<T>,
    pub result: Image<T>,
}

/// Average the geometry, warp both faces onto it, blend, and optionally
/// clone the blended inner face into one warped original.
pub fn make_simple_morph<T: Real>(
    img_a: &Image<T>,
    lm_a: &LandmarkSet,
    img_b: &Image<T>,
    lm_b: &LandmarkSet,
    alpha: f64,
    clone_into: CloneInto,
) -> Result<Image<T>> {
    Ok(morph_parts(img_a, lm_a, img_b, lm_b, alpha, clone_into)?.result)
}

pub fn morph_parts<T: Real>(
    img_a: &Image<T>,
    lm_a: &LandmarkSet,
    img_b: &Image<T>,
    lm_b: &LandmarkSet,
    alpha: f64,
    clone_into: CloneInto,
) -> Result<MorphParts<T>> {
    img_a.ensure_same_shape(img_b, "morph inputs")?;
    if !lm_a.same_names(lm_b) {
        return Err(Error::InvalidArgument("landmark name sets differ".into()));
    }
    let (w, h) = (img_a.width(), img_a.height());
    let avg = average_landmarks(lm_a, lm_b, alpha)?;
    let mesh = delaunay_triangulate(&avg, w, h)?;
    let warped_a = warp_piecewise_affine(img_a, lm_a, &avg, &mesh)?;
    let warped_b = warp_piecewise_affine(img_b, lm_b, &avg, &mesh)?;
    let blended = blend(&warped_a, &warped_b, alpha)?;
    let result = match clone_into {
        CloneInto::None => blended.clone(),
        CloneInto::A | CloneInto::B => {
            let target = if clone_into == CloneInto::A {
                &warped_a
            } else {
                &warped_b
            };
            let hull: Vec<Point> = avg.points().collect();
            let mask = CloneMask::from_hull(w, h, &hull, CLONE_ERODE_PX)?;
            seamless_clone(&blended, target, &mask)?
        }
    };
    Ok(MorphParts {
        landmarks: avg,
        warped_a,
        warped_b,
        blended,
        result,
    })
}
