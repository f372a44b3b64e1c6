//! Edge and corner counts before and after a JPEG-style recompression.

use std::f64::consts::PI;

use super::{FeatureVector, Scheme};
use crate::error::{Error, Result};
use crate::imagekit::{convolve2d, to_grayscale, Border, Image, Kernel2D};
use crate::scalar::Real;

pub const DEFAULT_EDGE_QUALITY: u8 = 75;
/// Sobel magnitude above which a pixel counts as an edge.
pub const EDGE_THRESHOLD: f64 = 0.1;
pub const HARRIS_K: f64 = 0.04;
pub const HARRIS_THRESHOLD: f64 = 1e-4;

const LUMINANCE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Standard luminance table scaled for `quality` in 1–100.
pub fn quantization_table(quality: u8) -> Result<[u16; 64]> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidArgument(format!(
            "quality {quality} outside 1..=100"
        )));
    }
    let q = quality as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    Ok(LUMINANCE.map(|t| ((t as u32 * scale + 50) / 100).clamp(1, 255) as u16))
}

fn basis() -> [[f64; 8]; 8] {
    let mut c = [[0.0; 8]; 8];
    for (u, row) in c.iter_mut().enumerate() {
        let alpha = if u == 0 {
            (1.0f64 / 8.0).sqrt()
        } else {
            (2.0f64 / 8.0).sqrt()
        };
        for (x, v) in row.iter_mut().enumerate() {
            *v = alpha * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos();
        }
    }
    c
}

/// Orthonormal 2-D DCT-II of a row-major 8×8 block.
pub fn dct8x8(block: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| c[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| c[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

/// Inverse of [`dct8x8`].
pub fn idct8x8(coef: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| c[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| c[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

/// Per channel: level-shift to `[−128, 127]`, 8×8 DCT, quantize with the
/// scaled luminance table, round, dequantize, invert, clamp to `[0, 1]`.
/// Partial edge blocks are replicate-padded.
pub fn dct_recompress<T: Real>(img: &Image<T>, quality: u8) -> Result<Image<T>> {
    let table = quantization_table(quality)?;
    let (w, h) = (img.width(), img.height());
    let mut out = vec![T::zero(); img.data().len()];
    let mut block = [0.0; 64];
    for c in 0..img.channels() {
        let plane = img.plane(c);
        let dst = &mut out[c * w * h..(c + 1) * w * h];
        for by in (0..h).step_by(8) {
            for bx in (0..w).step_by(8) {
                for y in 0..8 {
                    for x in 0..8 {
                        let (sx, sy) = ((bx + x).min(w - 1), (by + y).min(h - 1));
                        block[y * 8 + x] = plane[sy * w + sx].as_f64() * 255.0 - 128.0;
                    }
                }
                let mut coef = dct8x8(&block);
                for (v, &q) in coef.iter_mut().zip(&table) {
                    let q = q as f64;
                    *v = (*v / q).round() * q;
                }
                let rec = idct8x8(&coef);
                for y in 0..8.min(h - by) {
                    for x in 0..8.min(w - bx) {
                        let v = ((rec[y * 8 + x] + 128.0) / 255.0).clamp(0.0, 1.0);
                        dst[(by + y) * w + bx + x] = T::lit(v);
                    }
                }
            }
        }
    }
    img.with_data(out)
}

fn gray_f64<T: Real>(img: &Image<T>) -> Image<f64> {
    if img.channels() == 1 {
        img.cast()
    } else {
        to_grayscale(img).cast()
    }
}

fn sobel(gray: &Image<f64>) -> (Image<f64>, Image<f64>) {
    let kx =
        Kernel2D::new(3, 3, vec![-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0]).expect("3x3");
    let ky = kx.transposed();
    (
        convolve2d(gray, &kx, Border::Replicate),
        convolve2d(gray, &ky, Border::Replicate),
    )
}

/// Pixels whose raw Sobel gradient magnitude exceeds [`EDGE_THRESHOLD`].
pub fn sobel_edge_count(gray: &Image<f64>) -> usize {
    let (gx, gy) = sobel(gray);
    gx.data()
        .iter()
        .zip(gy.data())
        .filter(|(a, b)| (*a * *a + *b * *b).sqrt() > EDGE_THRESHOLD)
        .count()
}

/// Local maxima (over the 8-neighborhood) of the Harris response that
/// exceed [`HARRIS_THRESHOLD`]; structure tensor summed over 3×3 windows.
pub fn harris_corner_count(gray: &Image<f64>) -> usize {
    let (gx, gy) = sobel(gray);
    let (w, h) = (gray.width(), gray.height());
    let product = |a: &Image<f64>, b: &Image<f64>| {
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
        a.with_data(data).expect("same shape")
    };
    let window = Kernel2D::new(3, 3, vec![1.0; 9]).expect("3x3");
    let sxx = convolve2d(&product(&gx, &gx), &window, Border::Replicate);
    let syy = convolve2d(&product(&gy, &gy), &window, Border::Replicate);
    let sxy = convolve2d(&product(&gx, &gy), &window, Border::Replicate);
    let r: Vec<f64> = (0..w * h)
        .map(|i| {
            let (a, b, c) = (sxx.data()[i], syy.data()[i], sxy.data()[i]);
            a * b - c * c - HARRIS_K * (a + b) * (a + b)
        })
        .collect();
    let mut count = 0;
    for y in 0..h {
        for x in 0..w {
            let v = r[y * w + x];
            if v <= HARRIS_THRESHOLD {
                continue;
            }
            let mut is_max = true;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if (nx, ny) != (x, y) && r[ny * w + nx] > v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                count += 1;
            }
        }
    }
    count
}

/// `[edges, corners, edges', corners', Δedges, Δcorners]`, primes after
/// recompression at `quality`, deltas relative: `(after − before) / max(before, 1)`.
pub fn edge_feature_stats<T: Real>(img: &Image<T>, quality: u8) -> Result<FeatureVector> {
    let before = gray_f64(img);
    let after = gray_f64(&dct_recompress(img, quality)?);
    let (e0, c0) = (
        sobel_edge_count(&before) as f64,
        harris_corner_count(&before) as f64,
    );
    let (e1, c1) = (
        sobel_edge_count(&after) as f64,
        harris_corner_count(&after) as f64,
    );
    FeatureVector::new(
        Scheme::EdgeFeat,
        vec![
            e0,
            c0,
            e1,
            c1,
            (e1 - e0) / e0.max(1.0),
            (c1 - c0) / c0.max(1.0),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dct(block: &[f64; 64]) -> [f64; 64] {
        let a = |k: usize| if k == 0 { (0.125f64).sqrt() } else { 0.5 };
        let mut out = [0.0; 64];
        for v in 0..8 {
            for u in 0..8 {
                let mut s = 0.0;
                for y in 0..8 {
                    for x in 0..8 {
                        s += block[y * 8 + x]
                            * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos()
                            * ((2 * y + 1) as f64 * v as f64 * PI / 16.0).cos();
                    }
                }
                out[v * 8 + u] = a(u) * a(v) * s;
            }
        }
        out
    }

    fn texture(seed: u64, w: usize, h: usize) -> Image<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (fx, fy, ph): (f64, f64, f64) =
            (rng.gen_range(0.2..0.9), rng.gen_range(0.2..0.9), rng.gen());
        Image::from_fn(w, h, 1, |_, x, y| {
            0.5 + 0.35 * (fx * x as f64 + ph * 6.0).sin() * (fy * y as f64).cos()
        })
        .unwrap()
    }

    #[test]
    fn dct_matches_naive_and_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut block = [0.0; 64];
        block
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-128.0..127.0));
        let fast = dct8x8(&block);
        let slow = naive_dct(&block);
        assert!(fast.iter().zip(&slow).all(|(a, b)| (a - b).abs() < 1e-9));
        let back = idct8x8(&fast);
        assert!(back.iter().zip(&block).all(|(a, b)| (a - b).abs() < 1e-4));
    }

    #[test]
    fn quality_scaling() {
        assert_eq!(quantization_table(50).unwrap(), LUMINANCE);
        assert!(quantization_table(100).unwrap().iter().all(|&q| q == 1));
        assert_eq!(quantization_table(10).unwrap()[0], 80);
        assert_eq!(quantization_table(1).unwrap()[0], 255);
        assert!(quantization_table(0).is_err());
        assert!(quantization_table(101).is_err());
    }

    #[test]
    fn quality_100_is_near_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = Image::<f64>::from_fn(24, 16, 3, |_, _, _| rng.gen()).unwrap();
        assert!(dct_recompress(&img, 100).unwrap().max_abs_diff(&img) < 2.0 / 255.0);
    }

    #[test]
    fn constant_blocks_stay_uniform() {
        for q in [5u8, 50, 75, 100] {
            let img = Image::<f64>::filled(16, 8, 1, 0.37).unwrap();
            let out = dct_recompress(&img, q).unwrap();
            let first = out.data()[0];
            assert!(out.data().iter().all(|&v| (v - first).abs() < 1e-12));
            // DC moves by at most half a quantization step: q_dc / 2 / 8 levels.
            let q_dc = quantization_table(q).unwrap()[0] as f64;
            assert!((first - 0.37).abs() <= q_dc / 16.0 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn constant_image_has_no_features() {
        let f = edge_feature_stats(&Image::<f64>::filled(32, 32, 3, 0.5).unwrap(), 75).unwrap();
        assert_eq!(f.values(), &[0.0; 6]);
    }

    #[test]
    fn quality_100_changes_little() {
        for seed in 0..10 {
            let img = texture(seed, 64, 64);
            let f = edge_feature_stats(&img, 100).unwrap();
            assert!(f.values()[0] > 0.0);
            assert!(
                f.values()[4].abs() <= 0.05 && f.values()[5].abs() <= 0.05,
                "{:?}",
                f.values()
            );
        }
    }

    #[test]
    fn invariant_under_dc_aligned_shift() {
        // At quality 50 the DC step is 16, i.e. 2 levels per pixel, so a
        // shift of 2k/255 moves only the DC coefficient by whole steps.
        let img = texture(3, 48, 40).map(|v| (v * 64.0).round() / 64.0);
        let base = edge_feature_stats(&img, 50).unwrap();
        for k in [1.0, 3.0] {
            let shifted = img.map(|v| v + 2.0 * k / 255.0);
            assert_eq!(edge_feature_stats(&shifted, 50).unwrap(), base);
        }
    }
}
