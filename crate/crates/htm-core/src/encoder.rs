//! Adaptive video encoder: size reduction followed by Gaussian-window
//! adaptive thresholding turns a grayscale frame into a binary vector.
//!
//! The per-pixel threshold is the Gaussian-weighted mean of the
//! `block_size` x `block_size` neighborhood, rounded to the nearest
//! gray level, minus `threshold_c`. Rounding the mean makes the
//! comparison exact on uniform regions (a constant frame with
//! `threshold_c = 0` encodes to all zeros under the strict `>`). Frame
//! borders are handled by mirror reflection.

use crate::sdr::SdrVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("pixel buffer holds {got} bytes, expected {expected} for {width}x{height}")]
    PixelCountMismatch {
        width: usize,
        height: usize,
        expected: usize,
        got: usize,
    },
    #[error("rgb buffer holds {got} bytes, expected {expected} for {width}x{height}")]
    RgbCountMismatch {
        width: usize,
        height: usize,
        expected: usize,
        got: usize,
    },
    #[error("{dimension} {size} is not divisible by reduction ratio {ratio}")]
    NonDivisibleDimension {
        dimension: &'static str,
        size: usize,
        ratio: usize,
    },
    #[error("reduction ratio must be one of 1, 4, 8, 16; got {0}")]
    UnsupportedRatio(usize),
    #[error("block size must be an odd integer >= 3, got {0}")]
    BadBlockSize(usize),
    #[error("gaussian sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error(
        "frame {width}x{height} is smaller than the {block_size}x{block_size} threshold block"
    )]
    FrameSmallerThanBlock {
        width: usize,
        height: usize,
        block_size: usize,
    },
}

/// Row-major 8-bit grayscale frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, EncodeError> {
        if pixels.len() != width * height {
            return Err(EncodeError::PixelCountMismatch {
                width,
                height,
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Frame shrink factor applied before thresholding; 1, 4, 8 or 16.
    pub reduction_ratio: usize,
    /// Side of the Gaussian threshold window, odd and >= 3.
    pub block_size: usize,
    /// Gray levels subtracted from the local weighted mean.
    pub threshold_c: f64,
    /// Standard deviation of the Gaussian window, in pixels.
    pub gaussian_sigma: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        let block_size = 11;
        Self {
            reduction_ratio: 1,
            block_size,
            threshold_c: 2.0,
            gaussian_sigma: (block_size - 1) as f64 / 6.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncodeError> {
        if ![1, 4, 8, 16].contains(&self.reduction_ratio) {
            return Err(EncodeError::UnsupportedRatio(self.reduction_ratio));
        }
        if self.block_size < 3 || self.block_size % 2 == 0 {
            return Err(EncodeError::BadBlockSize(self.block_size));
        }
        if !(self.gaussian_sigma > 0.0) {
            return Err(EncodeError::BadSigma(self.gaussian_sigma));
        }
        Ok(())
    }

    /// Output vector length for a `width` x `height` input frame.
    pub fn output_len(&self, width: usize, height: usize) -> usize {
        (width / self.reduction_ratio) * (height / self.reduction_ratio)
    }
}

/// Box-filter reduction: each output pixel is the rounded (half-up)
/// mean of its `ratio` x `ratio` source block.
pub fn reduce_frame(frame: &GrayFrame, ratio: usize) -> Result<GrayFrame, EncodeError> {
    if ratio == 0 || frame.width % ratio != 0 {
        return Err(EncodeError::NonDivisibleDimension {
            dimension: "width",
            size: frame.width,
            ratio,
        });
    }
    if frame.height % ratio != 0 {
        return Err(EncodeError::NonDivisibleDimension {
            dimension: "height",
            size: frame.height,
            ratio,
        });
    }
    if ratio == 1 {
        return Ok(frame.clone());
    }
    let (ow, oh) = (frame.width / ratio, frame.height / ratio);
    let count = (ratio * ratio) as u32;
    let mut pixels = Vec::with_capacity(ow * oh);
    for oy in 0..oh {
        for ox in 0..ow {
            let mut sum = 0u32;
            for dy in 0..ratio {
                let row = (oy * ratio + dy) * frame.width + ox * ratio;
                for dx in 0..ratio {
                    sum += frame.pixels[row + dx] as u32;
                }
            }
            pixels.push(((sum + count / 2) / count) as u8);
        }
    }
    Ok(GrayFrame {
        width: ow,
        height: oh,
        pixels,
    })
}

/// BT.601 luma conversion of interleaved RGB bytes.
pub fn to_grayscale(rgb: &[u8], width: usize, height: usize) -> Result<GrayFrame, EncodeError> {
    if rgb.len() != 3 * width * height {
        return Err(EncodeError::RgbCountMismatch {
            width,
            height,
            expected: 3 * width * height,
            got: rgb.len(),
        });
    }
    let pixels = rgb
        .chunks_exact(3)
        .map(|px| {
            let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            y.round().min(255.0) as u8
        })
        .collect();
    GrayFrame::new(width, height, pixels)
}

// Mirror reflection (edge repeated): -1 -> 0, -2 -> 1, n -> n-1, ...
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - i - 1
    } else {
        i
    };
    r as usize
}

fn gaussian_kernel(block_size: usize, sigma: f64) -> Vec<f64> {
    let half = (block_size / 2) as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for w in &mut k {
        *w /= sum;
    }
    k
}

/// Per-pixel adaptive binarization. Bit (x, y) is set iff the pixel is
/// strictly brighter than its local Gaussian-weighted mean (rounded to
/// the nearest gray level) minus `threshold_c`.
pub fn adaptive_threshold(
    frame: &GrayFrame,
    cfg: &EncoderConfig,
) -> Result<SdrVector, EncodeError> {
    cfg.validate()?;
    let (w, h) = (frame.width, frame.height);
    if w < cfg.block_size || h < cfg.block_size {
        return Err(EncodeError::FrameSmallerThanBlock {
            width: w,
            height: h,
            block_size: cfg.block_size,
        });
    }
    let kernel = gaussian_kernel(cfg.block_size, cfg.gaussian_sigma);
    let half = (cfg.block_size / 2) as isize;

    // Separable convolution: horizontal then vertical pass.
    let mut horiz = vec![0.0f64; w * h];
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &k) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + j as isize - half, w);
                acc += k * frame.pixels[row + sx] as f64;
            }
            horiz[row + x] = acc;
        }
    }

    let mut bits = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &k) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + j as isize - half, h);
                acc += k * horiz[sy * w + x];
            }
            let local_mean = (acc + 0.5).floor();
            bits.push(frame.pixels[y * w + x] as f64 > local_mean - cfg.threshold_c);
        }
    }
    Ok(SdrVector::from_bits(bits))
}

/// Full encoding stage: size reduction, then adaptive thresholding.
pub fn encode(frame: &GrayFrame, cfg: &EncoderConfig) -> Result<SdrVector, EncodeError> {
    cfg.validate()?;
    let reduced = reduce_frame(frame, cfg.reduction_ratio)?;
    adaptive_threshold(&reduced, cfg)
}
