//! PNG boundary. Internal images are `[-1, 1]` floats; bytes map as
//! `b = round((x + 1) * 127.5)` and back as `x = b / 127.5 - 1`, clamped on
//! encode. 16-bit PNGs use the same symmetric map with 32767.5.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader, Rgb, RgbImage};

use crate::backends::ImageTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn from_bits(bits: u8) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::InvalidInput(format!("unsupported PNG bit depth {other}"))),
        }
    }

    fn half_range(self) -> f64 {
        match self {
            BitDepth::Eight => 127.5,
            BitDepth::Sixteen => 32767.5,
        }
    }
}

fn quantize(x: f64, depth: BitDepth) -> u16 {
    let h = depth.half_range();
    ((x + 1.0) * h).round().clamp(0.0, 2.0 * h) as u16
}

fn dequantize(b: u16, depth: BitDepth) -> f64 {
    b as f64 / depth.half_range() - 1.0
}

/// Largest round-trip error for in-range values at `depth`.
pub fn quantization_step(depth: BitDepth) -> f64 {
    0.5 / depth.half_range()
}

pub fn encode_png(img: &ImageTensor, depth: BitDepth) -> Result<Vec<u8>> {
    let (w, h) = (img.width(), img.height());
    let dynamic = match depth {
        BitDepth::Eight => {
            let buf: Vec<u8> = img.data().iter().map(|&x| quantize(x, depth) as u8).collect();
            DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, buf).expect("buffer matches dimensions"))
        }
        BitDepth::Sixteen => {
            let buf: Vec<u16> = img.data().iter().map(|&x| quantize(x, depth)).collect();
            DynamicImage::ImageRgb16(
                image::ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, buf)
                    .expect("buffer matches dimensions"),
            )
        }
    };
    let mut out = Cursor::new(Vec::new());
    dynamic.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Decodes any PNG color type; alpha is dropped and gray is replicated.
pub fn decode_png(bytes: &[u8]) -> Result<ImageTensor> {
    let reader = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
    let dynamic = reader.decode()?;
    let (w, h) = (dynamic.width(), dynamic.height());
    let data: Vec<f64> = match dynamic {
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => dynamic
            .to_rgb16()
            .into_raw()
            .into_iter()
            .map(|b| dequantize(b, BitDepth::Sixteen))
            .collect(),
        other => other
            .to_rgb8()
            .into_raw()
            .into_iter()
            .map(|b| dequantize(b as u16, BitDepth::Eight))
            .collect(),
    };
    ImageTensor::new(h, w, data)
}

pub fn save_png(path: &Path, img: &ImageTensor, depth: BitDepth) -> Result<()> {
    let bytes = encode_png(img, depth)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_png(path: &Path) -> Result<ImageTensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes)
}

/// Images side by side, left to right. All must share a height.
pub fn hstack(images: &[ImageTensor]) -> Result<ImageTensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidInput("nothing to stack".into()))?;
    let h = first.height();
    if images.iter().any(|i| i.height() != h) {
        return Err(Error::InvalidInput("stacked images must share a height".into()));
    }
    let total_w: u32 = images.iter().map(|i| i.width()).sum();
    let mut data = Vec::with_capacity((h * total_w * 3) as usize);
    for y in 0..h as usize {
        for img in images {
            let row = img.width() as usize * 3;
            data.extend_from_slice(&img.data()[y * row..(y + 1) * row]);
        }
    }
    ImageTensor::new(h, total_w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: u32, w: u32) -> ImageTensor {
        let n = (h * w * 3) as usize;
        ImageTensor::new(h, w, (0..n).map(|i| (i as f64 / n as f64) * 2.0 - 1.0).collect()).unwrap()
    }

    #[test]
    fn byte_mapping_is_symmetric() {
        assert_eq!(quantize(-1.0, BitDepth::Eight), 0);
        assert_eq!(quantize(1.0, BitDepth::Eight), 255);
        assert_eq!(quantize(5.0, BitDepth::Eight), 255);
        assert_eq!(quantize(-5.0, BitDepth::Eight), 0);
        for b in 0..=255u16 {
            assert_eq!(quantize(dequantize(b, BitDepth::Eight), BitDepth::Eight), b);
            let x = dequantize(b, BitDepth::Eight);
            assert!((dequantize(255 - b, BitDepth::Eight) + x).abs() < 1e-12);
        }
    }

    #[test]
    fn png_round_trip_within_quantization() {
        let img = ramp(5, 7);
        for depth in [BitDepth::Eight, BitDepth::Sixteen] {
            let back = decode_png(&encode_png(&img, depth).unwrap()).unwrap();
            assert_eq!((back.height(), back.width()), (5, 7));
            let err = back.max_abs_diff(&img).unwrap();
            assert!(err <= quantization_step(depth) + 1e-12, "{depth:?}: {err}");
        }
        assert!(quantization_step(BitDepth::Sixteen) < 1e-4);
    }

    #[test]
    fn decoded_pngs_reencode_identically() {
        let bytes = encode_png(&ramp(4, 4), BitDepth::Eight).unwrap();
        let again = encode_png(&decode_png(&bytes).unwrap(), BitDepth::Eight).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(matches!(decode_png(b"not a png"), Err(Error::Image(_))));
    }

    #[test]
    fn hstack_places_side_by_side() {
        let a = ImageTensor::new(1, 1, vec![0.1, 0.2, 0.3]).unwrap();
        let b = ImageTensor::new(1, 2, vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9]).unwrap();
        let s = hstack(&[a, b]).unwrap();
        assert_eq!(s.width(), 3);
        assert_eq!(s.data()[3], 0.4);
        assert!(hstack(&[]).is_err());
    }
}
