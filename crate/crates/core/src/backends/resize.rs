//! Linear image resampling operators and their adjoints.
//!
//! Both operators are linear maps, so the adjoints are exact transposes and
//! back-propagating through them needs no saved state.

use super::ImageTensor;

/// One output sample of a 1-D bilinear resampler: two taps with weights.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Tap {
    lo: usize,
    hi: usize,
    w_lo: f64,
    w_hi: f64,
}

/// Separable bilinear resize from `src x src` to `dst x dst`, half-pixel
/// centers, edge clamping, no antialiasing.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearResize {
    src: u32,
    dst: u32,
    taps: Vec<Tap>,
}

impl BilinearResize {
    pub fn new(src: u32, dst: u32) -> Self {
        let scale = src as f64 / dst as f64;
        let last = src as usize - 1;
        let taps = (0..dst)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(last);
                let w_hi = pos - lo as f64;
                Tap {
                    lo,
                    hi,
                    w_lo: 1.0 - w_hi,
                    w_hi,
                }
            })
            .collect();
        BilinearResize { src, dst, taps }
    }

    pub fn src(&self) -> u32 {
        self.src
    }

    pub fn dst(&self) -> u32 {
        self.dst
    }

    pub fn apply(&self, img: &ImageTensor) -> ImageTensor {
        debug_assert_eq!((img.height(), img.width()), (self.src, self.src));
        if self.src == self.dst {
            return img.clone();
        }
        let (s, d) = (self.src as usize, self.dst as usize);
        let input = img.data();
        // Rows first: (d x s x 3), then columns.
        let mut rows = vec![0.0; d * s * 3];
        for (i, t) in self.taps.iter().enumerate() {
            for x in 0..s * 3 {
                rows[i * s * 3 + x] = t.w_lo * input[t.lo * s * 3 + x] + t.w_hi * input[t.hi * s * 3 + x];
            }
        }
        let mut out = vec![0.0; d * d * 3];
        for y in 0..d {
            for (j, t) in self.taps.iter().enumerate() {
                for k in 0..3 {
                    out[(y * d + j) * 3 + k] = t.w_lo * rows[(y * s + t.lo) * 3 + k]
                        + t.w_hi * rows[(y * s + t.hi) * 3 + k];
                }
            }
        }
        ImageTensor::from_raw(self.dst, self.dst, out)
    }

    /// Transpose of [`BilinearResize::apply`].
    pub fn adjoint(&self, grad: &ImageTensor) -> ImageTensor {
        debug_assert_eq!((grad.height(), grad.width()), (self.dst, self.dst));
        if self.src == self.dst {
            return grad.clone();
        }
        let (s, d) = (self.src as usize, self.dst as usize);
        let g = grad.data();
        let mut rows = vec![0.0; d * s * 3];
        for y in 0..d {
            for (j, t) in self.taps.iter().enumerate() {
                for k in 0..3 {
                    let v = g[(y * d + j) * 3 + k];
                    rows[(y * s + t.lo) * 3 + k] += t.w_lo * v;
                    rows[(y * s + t.hi) * 3 + k] += t.w_hi * v;
                }
            }
        }
        let mut out = vec![0.0; s * s * 3];
        for (i, t) in self.taps.iter().enumerate() {
            for x in 0..s * 3 {
                let v = rows[i * s * 3 + x];
                out[t.lo * s * 3 + x] += t.w_lo * v;
                out[t.hi * s * 3 + x] += t.w_hi * v;
            }
        }
        ImageTensor::from_raw(self.src, self.src, out)
    }
}

/// Bilinear resize of an arbitrary (possibly non-square) image to `dst x dst`.
pub fn resize_to_square(img: &ImageTensor, dst: u32) -> ImageTensor {
    if img.height() == img.width() {
        return BilinearResize::new(img.width(), dst).apply(img);
    }
    let rx = BilinearResize::new(img.width(), dst);
    let ry = BilinearResize::new(img.height(), dst);
    let (h, w, d) = (img.height() as usize, img.width() as usize, dst as usize);
    let input = img.data();
    let mut cols = vec![0.0; h * d * 3];
    for y in 0..h {
        for (j, t) in rx.taps.iter().enumerate() {
            for k in 0..3 {
                cols[(y * d + j) * 3 + k] =
                    t.w_lo * input[(y * w + t.lo) * 3 + k] + t.w_hi * input[(y * w + t.hi) * 3 + k];
            }
        }
    }
    let mut out = vec![0.0; d * d * 3];
    for (i, t) in ry.taps.iter().enumerate() {
        for x in 0..d * 3 {
            out[i * d * 3 + x] = t.w_lo * cols[t.lo * d * 3 + x] + t.w_hi * cols[t.hi * d * 3 + x];
        }
    }
    ImageTensor::from_raw(dst, dst, out)
}

/// Nearest-neighbour upsampling by an integer factor.
pub fn upsample_nearest(img: &ImageTensor, dst: u32) -> ImageTensor {
    let (s, d) = (img.width() as usize, dst as usize);
    debug_assert!(d % s == 0);
    let f = d / s;
    let input = img.data();
    let mut out = vec![0.0; d * d * 3];
    for y in 0..d {
        let sy = y / f;
        for x in 0..d {
            let sx = x / f;
            out[(y * d + x) * 3..(y * d + x) * 3 + 3]
                .copy_from_slice(&input[(sy * s + sx) * 3..(sy * s + sx) * 3 + 3]);
        }
    }
    ImageTensor::from_raw(dst, dst, out)
}

/// Transpose of [`upsample_nearest`]: sums each `f x f` cell.
pub fn upsample_nearest_adjoint(grad: &ImageTensor, src: u32) -> ImageTensor {
    let (s, d) = (src as usize, grad.width() as usize);
    let f = d / s;
    let g = grad.data();
    let mut out = vec![0.0; s * s * 3];
    for y in 0..d {
        let sy = y / f;
        for x in 0..d {
            let sx = x / f;
            for k in 0..3 {
                out[(sy * s + sx) * 3 + k] += g[(y * d + x) * 3 + k];
            }
        }
    }
    ImageTensor::from_raw(src, src, out)
}
