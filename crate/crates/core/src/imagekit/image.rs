use crate::error::{Error, Result};
use crate::scalar::Real;

/// Planar floating-point raster.
///
/// Samples are stored channel-planar, each plane row-major:
/// `data[c * width * height + y * width + x]`. Pixel centers sit at integer
/// coordinates with the origin at the top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T = f64> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "image dimensions {width}x{height} must be positive"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!(
                "channel count {channels} not in {{1, 3}}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{width}x{height}x{channels} image needs {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    /// Builds an image from `f(channel, x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub(crate) fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> T {
        self.data[c * self.plane_len() + y * self.width + x]
    }

    /// Sample with replicate border for out-of-range integer coordinates.
    #[inline]
    pub fn get_clamped(&self, c: usize, x: isize, y: isize) -> T {
        let xi = x.clamp(0, self.width as isize - 1) as usize;
        let yi = y.clamp(0, self.height as isize - 1) as usize;
        self.get(c, xi, yi)
    }

    /// Bilinear sample at a real-valued position, replicate border.
    pub fn sample_bilinear(&self, c: usize, x: f64, y: f64) -> T {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = T::lit(x - x0);
        let fy = T::lit(y - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        let p00 = self.get_clamped(c, x0, y0);
        let p10 = self.get_clamped(c, x0 + 1, y0);
        let p01 = self.get_clamped(c, x0, y0 + 1);
        let p11 = self.get_clamped(c, x0 + 1, y0 + 1);
        let one = T::one();
        let top = p00 * (one - fx) + p10 * fx;
        let bottom = p01 * (one - fx) + p11 * fx;
        top * (one - fy) + bottom * fy
    }

    pub fn same_shape<U: Real>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape<U: Real>(&self, other: &Image<U>, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Same geometry, new samples.
    pub fn with_data(&self, data: Vec<T>) -> Result<Self> {
        Self::new(self.width, self.height, self.channels, data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn cast<U: Real>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn clamped(&self) -> Self {
        self.map(|v| v.max(T::zero()).min(T::one()))
    }

    /// True when every sample is finite and within `[0, 1]`.
    pub fn is_displayable(&self) -> bool {
        self.data
            .iter()
            .all(|v| v.is_finite() && *v >= T::zero() && *v <= T::one())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs().as_f64())
            .fold(0.0, f64::max)
    }

    /// Extracts one channel as a single-channel image.
    pub fn channel(&self, c: usize) -> Self {
        Self {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(c).to_vec(),
        }
    }
}
