use super::{FeatureVector, Scheme};
use crate::error::{Error, Result};
use crate::imagekit::Image;
use crate::scalar::Real;

pub const LBP_BINS: usize = 59;

/// Neighbor offsets, east first, counter-clockwise (y grows downward).
const NEIGHBORS: [(isize, isize); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

const fn transitions(p: u8) -> u32 {
    (p ^ p.rotate_right(1)).count_ones()
}

const UNIFORM_BINS: [u8; 256] = {
    let mut table = [58u8; 256];
    let mut next = 0u8;
    let mut p = 0usize;
    while p < 256 {
        if transitions(p as u8) <= 2 {
            table[p] = next;
            next += 1;
        }
        p += 1;
    }
    table
};

/// Histogram bin of an 8-bit pattern: 0–57 for uniform patterns in
/// ascending order, 58 otherwise.
pub fn uniform_bin(pattern: u8) -> usize {
    UNIFORM_BINS[pattern as usize] as usize
}

/// Pattern at interior pixel `(x, y)`; bit `b` is set iff neighbor `b` is
/// at least the center.
pub fn lbp_code<T: Real>(gray: &Image<T>, x: usize, y: usize) -> u8 {
    let c = gray.get(0, x, y);
    let mut code = 0u8;
    for (b, (dx, dy)) in NEIGHBORS.iter().enumerate() {
        let v = gray.get(0, (x as isize + dx) as usize, (y as isize + dy) as usize);
        if v >= c {
            code |= 1 << b;
        }
    }
    code
}

/// Normalized 59-bin uniform-LBP histogram over interior pixels.
pub fn lbp_histogram<T: Real>(gray: &Image<T>) -> Result<FeatureVector> {
    if gray.channels() != 1 {
        return Err(Error::Shape("LBP needs a single-channel image".into()));
    }
    let (w, h) = (gray.width(), gray.height());
    if w < 3 || h < 3 {
        return Err(Error::InvalidArgument(format!(
            "{w}x{h} image too small for LBP"
        )));
    }
    let mut counts = [0u64; LBP_BINS];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            counts[uniform_bin(lbp_code(gray, x, y))] += 1;
        }
    }
    let total = ((w - 2) * (h - 2)) as f64;
    FeatureVector::new(
        Scheme::Lbp59,
        counts.iter().map(|&c| c as f64 / total).collect(),
    )
}
