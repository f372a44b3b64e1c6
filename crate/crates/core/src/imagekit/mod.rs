//! Image container, 8-bit I/O, filtering, resampling and face normalization.

mod image;
mod io;
mod landmarks;
mod normalize;
mod ops;

pub use self::image::Image;
pub use self::io::{load_image, quantize, save_image};
pub use self::landmarks::{LandmarkSet, Point, BROW_PREFIX, EYE_LEFT, EYE_RIGHT, MOUTH_PREFIX};
pub use self::normalize::{normalize_face, normalize_face_to, FACE_CROP_SIZE};
pub use self::ops::{convolve2d, resize_bilinear, to_grayscale, Border, Kernel2D};
