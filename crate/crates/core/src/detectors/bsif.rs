use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FeatureVector, Scheme};
use crate::container::{Tensor, WeightFile};
use crate::error::{Error, Result};
use crate::imagekit::Image;
use crate::scalar::Real;

pub const BSIF_SIZE: usize = 11;
pub const BSIF_FILTERS: usize = 12;
pub const BSIF_BITS: usize = 1 << BSIF_FILTERS;
const TAPS: usize = BSIF_SIZE * BSIF_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankSource {
    Loaded,
    Seeded(u64),
}

/// Twelve 11×11 filters, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BsifFilterBank {
    filters: Vec<[f64; TAPS]>,
    source: BankSource,
}

impl BsifFilterBank {
    pub fn new(filters: Vec<[f64; TAPS]>, source: BankSource) -> Result<Self> {
        if filters.len() != BSIF_FILTERS {
            return Err(Error::Shape(format!(
                "{} filters, expected {BSIF_FILTERS}",
                filters.len()
            )));
        }
        if filters.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite BSIF taps".into()));
        }
        Ok(Self { filters, source })
    }

    pub fn filters(&self) -> &[[f64; TAPS]] {
        &self.filters
    }

    pub fn source(&self) -> BankSource {
        self.source
    }

    pub fn to_weight_file(&self) -> WeightFile {
        WeightFile::new(
            self.filters
                .iter()
                .enumerate()
                .map(|(k, f)| {
                    Tensor::new(
                        format!("bsif_{k:02}"),
                        vec![BSIF_SIZE as u32, BSIF_SIZE as u32],
                        f.iter().map(|&v| v as f32).collect(),
                    )
                    .expect("11x11 tensor")
                })
                .collect(),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_weight_file().save(path)
    }
}

/// Seeded surrogate bank: Gaussian vectors, mean removed, Gram–Schmidt
/// orthonormalized, taps rounded to `f32` so saving is lossless.
pub fn generate_bsif_bank(seed: u64) -> BsifFilterBank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<[f64; TAPS]> = Vec::with_capacity(BSIF_FILTERS);
    while basis.len() < BSIF_FILTERS {
        let mut v = [0.0; TAPS];
        for t in &mut v {
            *t = StandardNormal.sample(&mut rng);
        }
        let mean = v.iter().sum::<f64>() / TAPS as f64;
        v.iter_mut().for_each(|t| *t -= mean);
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|t| *t /= norm);
        basis.push(v);
    }
    let filters = basis
        .into_iter()
        .map(|f| f.map(|t| t as f32 as f64))
        .collect();
    BsifFilterBank::new(filters, BankSource::Seeded(seed)).expect("twelve finite filters")
}

pub fn load_bsif_bank(path: impl AsRef<Path>) -> Result<BsifFilterBank> {
    let wf = WeightFile::load(path)?;
    if wf.tensors.len() != BSIF_FILTERS {
        return Err(Error::Container(format!(
            "BSIF bank needs {BSIF_FILTERS} tensors, found {}",
            wf.tensors.len()
        )));
    }
    let mut filters = Vec::with_capacity(BSIF_FILTERS);
    for t in &wf.tensors {
        if t.dims != [BSIF_SIZE as u32, BSIF_SIZE as u32] {
            return Err(Error::Container(format!(
                "tensor `{}` is not 11x11",
                t.name
            )));
        }
        let mut f = [0.0; TAPS];
        for (dst, &src) in f.iter_mut().zip(&t.data) {
            *dst = src as f64;
        }
        filters.push(f);
    }
    BsifFilterBank::new(filters, BankSource::Loaded)
}

/// 12-bit code for every pixel whose 11×11 window fits, row-major over the
/// valid region. Filter `k` sets bit `k` when `Σ f_k·(window − center) > 0`;
/// for zero-mean filters this is the plain correlation response, and flat
/// windows give exactly zero.
pub fn bsif_codes<T: Real>(gray: &Image<T>, bank: &BsifFilterBank) -> Result<Vec<u16>> {
    if gray.channels() != 1 {
        return Err(Error::Shape("BSIF needs a single-channel image".into()));
    }
    let (w, h) = (gray.width(), gray.height());
    if w < BSIF_SIZE || h < BSIF_SIZE {
        return Err(Error::InvalidArgument(format!(
            "{w}x{h} image too small for BSIF"
        )));
    }
    let r = BSIF_SIZE / 2;
    let px: Vec<f64> = gray.data().iter().map(|v| v.as_f64()).collect();
    let mut codes = Vec::with_capacity((w - 2 * r) * (h - 2 * r));
    let mut window = [0.0; TAPS];
    for y in r..h - r {
        for x in r..w - r {
            let c = px[y * w + x];
            for i in 0..BSIF_SIZE {
                let row = (y + i - r) * w + x - r;
                for j in 0..BSIF_SIZE {
                    window[i * BSIF_SIZE + j] = px[row + j] - c;
                }
            }
            let mut code = 0u16;
            for (k, f) in bank.filters.iter().enumerate() {
                let mut resp = 0.0;
                for (a, b) in f.iter().zip(&window) {
                    resp += a * b;
                }
                if resp > 0.0 {
                    code |= 1 << k;
                }
            }
            codes.push(code);
        }
    }
    Ok(codes)
}

/// Normalized 4096-bin histogram of [`bsif_codes`].
pub fn bsif_histogram<T: Real>(gray: &Image<T>, bank: &BsifFilterBank) -> Result<FeatureVector> {
    let codes = bsif_codes(gray, bank)?;
    let mut counts = vec![0u64; BSIF_BITS];
    for &c in &codes {
        counts[c as usize] += 1;
    }
    let total = codes.len() as f64;
    FeatureVector::new(
        Scheme::Bsif4096,
        counts.iter().map(|&c| c as f64 / total).collect(),
    )
}
