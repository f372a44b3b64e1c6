//! Baseline morph touch-ups: unsharp masking and histogram matching.

use crate::error::{Error, Result};
use crate::imagekit::{convolve2d, quantize, Border, Image, Kernel2D};
use crate::scalar::Real;

pub const DEFAULT_SHARP_SIGMA: f64 = 1.5;
pub const DEFAULT_SHARP_AMOUNT: f64 = 0.7;
pub const DEFAULT_SHARP_THRESHOLD: f64 = 0.0;

const LEVELS: usize = 256;

/// `img + amount·(img − blur(img))` wherever `|img − blur(img)| > threshold`,
/// clamped to `[0, 1]`.
pub fn unsharp_mask<T: Real>(
    img: &Image<T>,
    sigma: f64,
    amount: f64,
    threshold: f64,
) -> Result<Image<T>> {
    Ok(unsharp_mask_unclamped(img, sigma, amount, threshold)?.clamped())
}

/// [`unsharp_mask`] without the final clamp.
pub fn unsharp_mask_unclamped<T: Real>(
    img: &Image<T>,
    sigma: f64,
    amount: f64,
    threshold: f64,
) -> Result<Image<T>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(amount >= 0.0 && amount.is_finite()) || !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidArgument(
            "amount and threshold must be finite and non-negative".into(),
        ));
    }
    let row = Kernel2D::<T>::gaussian_row(sigma)?;
    let blurred = convolve2d(
        &convolve2d(img, &row, Border::Replicate),
        &row.transposed(),
        Border::Replicate,
    );
    let (amount, threshold) = (T::lit(amount), T::lit(threshold));
    let data = img
        .data()
        .iter()
        .zip(blurred.data())
        .map(|(&v, &b)| {
            let detail = v - b;
            if detail.abs() > threshold {
                v + amount * detail
            } else {
                v
            }
        })
        .collect();
    img.with_data(data)
}

/// Per-channel 256-level histogram matching of `img` to `reference`.
pub fn histogram_match<T: Real>(img: &Image<T>, reference: &Image<T>) -> Result<Image<T>> {
    if img.channels() != reference.channels() {
        return Err(Error::Shape(format!(
            "image has {} channels, reference {}",
            img.channels(),
            reference.channels()
        )));
    }
    let refs: Vec<[u64; LEVELS]> = (0..reference.channels())
        .map(|c| histogram(reference.plane(c)))
        .collect();
    match_to_counts(img, &refs)
}

/// Histogram matching against a flat reference.
pub fn equalize<T: Real>(img: &Image<T>) -> Result<Image<T>> {
    match_to_counts(img, &vec![[1u64; LEVELS]; img.channels()])
}

fn histogram<T: Real>(plane: &[T]) -> [u64; LEVELS] {
    let mut h = [0u64; LEVELS];
    for &v in plane {
        h[quantize(v) as usize] += 1;
    }
    h
}

fn cumulative(h: &[u64; LEVELS]) -> [u64; LEVELS] {
    let mut c = [0u64; LEVELS];
    let mut acc = 0;
    for (ci, &hi) in c.iter_mut().zip(h) {
        acc += hi;
        *ci = acc;
    }
    c
}

/// Level lookup table taking each image level `k` to the smallest reference
/// level whose CDF reaches `CDF_img(k)`. Comparisons are exact integer
/// cross-multiplications.
fn level_map(img_hist: &[u64; LEVELS], ref_hist: &[u64; LEVELS]) -> [u8; LEVELS] {
    let (ci, cr) = (cumulative(img_hist), cumulative(ref_hist));
    let (ni, nr) = (ci[LEVELS - 1] as u128, cr[LEVELS - 1] as u128);
    let mut lut = [0u8; LEVELS];
    let mut j = 0;
    for k in 0..LEVELS {
        // CDF_img is non-decreasing, so the search can resume at `j`.
        while j < LEVELS - 1 && (cr[j] as u128) * ni < (ci[k] as u128) * nr {
            j += 1;
        }
        lut[k] = j as u8;
    }
    lut
}

fn match_to_counts<T: Real>(img: &Image<T>, refs: &[[u64; LEVELS]]) -> Result<Image<T>> {
    let scale = T::lit(255.0);
    let mut data = Vec::with_capacity(img.data().len());
    for (c, ref_hist) in refs.iter().enumerate() {
        let plane = img.plane(c);
        let lut = level_map(&histogram(plane), ref_hist);
        data.extend(
            plane
                .iter()
                .map(|&v| T::lit(lut[quantize(v) as usize] as f64) / scale),
        );
    }
    img.with_data(data)
}
