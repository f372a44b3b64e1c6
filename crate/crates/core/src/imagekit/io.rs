//! 8-bit PNG and binary PGM/PPM readers and writers.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};
use crate::scalar::Real;

const PNG_SIGNATURE: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

/// Reads an 8-bit grayscale or RGB image, mapping byte `v` to `v / 255`.
pub fn load_image<T: Real>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes, path)
}

pub(crate) fn decode_image<T: Real>(bytes: &[u8], path: &Path) -> Result<Image<T>> {
    let (w, h, c, raw) = if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes, path)?
    } else if bytes.len() >= 2 && bytes[0] == b'P' {
        decode_pnm(bytes, path)?
    } else {
        return Err(Error::Unsupported {
            path: path.into(),
            reason: "neither PNG nor binary PGM/PPM".into(),
        });
    };
    let plane = w * h;
    let mut data = vec![T::zero(); plane * c];
    let scale = T::lit(255.0);
    for (i, &b) in raw.iter().enumerate() {
        let (p, ch) = (i / c, i % c);
        data[ch * plane + p] = T::lit(b as f64) / scale;
    }
    Image::new(w, h, c, data)
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let decode_err = |e: png::DecodingError| Error::Decode {
        path: path.into(),
        reason: e.to_string(),
    };
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let info = reader.info();
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::Unsupported {
                path: path.into(),
                reason: format!("PNG color type {other:?}"),
            })
        }
    };
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Unsupported {
            path: path.into(),
            reason: format!("PNG bit depth {:?}", info.bit_depth),
        });
    }
    let size = reader.output_buffer_size().ok_or_else(|| Error::Decode {
        path: path.into(),
        reason: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let out = reader.next_frame(&mut buf).map_err(decode_err)?;
    let (w, h) = (out.width as usize, out.height as usize);
    let row = w * channels;
    let mut raw = Vec::with_capacity(row * h);
    for y in 0..h {
        raw.extend_from_slice(&buf[y * out.line_size..y * out.line_size + row]);
    }
    Ok((w, h, channels, raw))
}

fn decode_pnm(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        _ => {
            return Err(Error::Unsupported {
                path: path.into(),
                reason: format!("netpbm variant P{}", bytes[1] as char),
            })
        }
    };
    let bad = |reason: &str| Error::Decode {
        path: path.into(),
        reason: reason.into(),
    };
    // Header: magic, width, height, maxval, separated by whitespace and
    // `#` comments, then exactly one whitespace byte before the raster.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("malformed header number"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing separator after header"));
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Unsupported {
            path: path.into(),
            reason: format!("maxval {maxval} (only 8-bit supported)"),
        });
    }
    if w == 0 || h == 0 {
        return Err(bad("zero image dimension"));
    }
    let n = w * h * channels;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| bad("truncated raster"))?;
    Ok((w, h, channels, raster.to_vec()))
}

/// Quantizes a sample to a byte: clamp to `[0,1]`, then round half up.
#[inline]
pub fn quantize<T: Real>(v: T) -> u8 {
    let v = v.as_f64();
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0 + 0.5).floor() as u8
}

fn interleaved_bytes<T: Real>(img: &Image<T>) -> Vec<u8> {
    let (plane, c) = (img.plane_len(), img.channels());
    let mut out = Vec::with_capacity(plane * c);
    for p in 0..plane {
        for ch in 0..c {
            out.push(quantize(img.data()[ch * plane + p]));
        }
    }
    out
}

/// Writes an 8-bit image. `.pgm`, `.ppm` and `.pnm` produce binary netpbm,
/// anything else PNG.
pub fn save_image<T: Real>(img: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let bytes = match ext.as_str() {
        "pgm" | "ppm" | "pnm" => encode_pnm(img),
        _ => encode_png(img)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_pnm<T: Real>(img: &Image<T>) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(interleaved_bytes(img));
    out
}

pub(crate) fn encode_png<T: Real>(img: &Image<T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(if img.channels() == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Encode(e.to_string()))?;
        writer
            .write_image_data(&interleaved_bytes(img))
            .map_err(|e| Error::Encode(e.to_string()))?;
        writer.finish().map_err(|e| Error::Encode(e.to_string()))?;
    }
    Ok(out)
}
