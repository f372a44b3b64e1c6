use super::Image;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Odd-sized correlation kernel, taps row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D<T = f64> {
    rows: usize,
    cols: usize,
    taps: Vec<T>,
}

impl<T: Real> Kernel2D<T> {
    pub fn new(rows: usize, cols: usize, taps: Vec<T>) -> Result<Self> {
        if rows.is_multiple_of(2) || cols.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel {rows}x{cols} must be odd-sized"
            )));
        }
        if rows * cols != taps.len() {
            return Err(Error::Shape(format!(
                "kernel {rows}x{cols} needs {} taps",
                rows * cols
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("kernel taps must be finite".into()));
        }
        Ok(Self { rows, cols, taps })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.taps[r * self.cols + c]
    }

    pub fn sum(&self) -> T {
        self.taps.iter().copied().sum()
    }

    /// Normalized 1-D Gaussian of radius `⌈3σ⌉`, as a row kernel.
    pub fn gaussian_row(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma {sigma} must be positive"
            )));
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let raw: Vec<f64> = (-radius..=radius)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let taps = raw.iter().map(|v| T::lit(v / total)).collect::<Vec<_>>();
        Self::new(1, taps.len(), taps)
    }

    pub fn transposed(&self) -> Self {
        let mut taps = Vec::with_capacity(self.taps.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                taps.push(self.at(r, c));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            taps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Border {
    #[default]
    Replicate,
    Zero,
}

/// Luma conversion with weights 0.299/0.587/0.114; gray input is returned as is.
pub fn to_grayscale<T: Real>(img: &Image<T>) -> Image<T> {
    if img.channels() == 1 {
        return img.clone();
    }
    let (wr, wg, wb) = (T::lit(0.299), T::lit(0.587), T::lit(0.114));
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = (0..img.plane_len())
        .map(|i| {
            (wr * r[i] + wg * g[i] + wb * b[i])
                .max(T::zero())
                .min(T::one())
        })
        .collect();
    Image::new(img.width(), img.height(), 1, data).expect("shape preserved")
}

/// Same-size correlation of every channel with `k`. Output is not clamped.
pub fn convolve2d<T: Real>(img: &Image<T>, k: &Kernel2D<T>, border: Border) -> Image<T> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let (ry, rx) = ((k.rows / 2) as isize, (k.cols / 2) as isize);
    let mut out = img.clone();
    for c in 0..img.channels() {
        let src = img.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = T::zero();
                for ky in 0..k.rows {
                    let sy = y + ky as isize - ry;
                    for kx in 0..k.cols {
                        let sx = x + kx as isize - rx;
                        let v = if sx >= 0 && sx < w && sy >= 0 && sy < h {
                            src[(sy * w + sx) as usize]
                        } else {
                            match border {
                                Border::Zero => continue,
                                Border::Replicate => {
                                    let cx = sx.clamp(0, w - 1);
                                    let cy = sy.clamp(0, h - 1);
                                    src[(cy * w + cx) as usize]
                                }
                            }
                        };
                        acc += k.at(ky, kx) * v;
                    }
                }
                dst[(y * w + x) as usize] = acc;
            }
        }
    }
    out
}

/// Bilinear resize with half-pixel-center alignment and replicate border.
pub fn resize_bilinear<T: Real>(img: &Image<T>, w: usize, h: usize) -> Result<Image<T>> {
    if w == 0 || h == 0 {
        return Err(Error::InvalidArgument(format!(
            "target size {w}x{h} must be positive"
        )));
    }
    if w == img.width() && h == img.height() {
        return Ok(img.clone());
    }
    let sx = img.width() as f64 / w as f64;
    let sy = img.height() as f64 / h as f64;
    Image::from_fn(w, h, img.channels(), |c, x, y| {
        img.sample_bilinear(c, (x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5)
    })
}
