//! Block-transform proxy codec.
//!
//! An 8x8 integer DCT with dead-zone uniform quantization stands in for a
//! real video codec so the toolchain comparison runs without external
//! binaries. Coarse quantization suppresses high-frequency content the same
//! way real lossy coding does, which is the effect the grain pipeline
//! compensates for. The bit-size estimate prices each nonzero coefficient
//! and each zero run at Exp-Golomb-like cost; it is a rate proxy, not an
//! actual bitstream.

use crate::dct::{forward_dct8, inverse_dct8};
use crate::error::{Error, Result};
use crate::frame::{Frame, Plane};

/// Quantizer configuration; the transform block size is fixed at 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProxyCodecConfig {
    pub quant_step: i64,
}

impl Default for ProxyCodecConfig {
    fn default() -> Self {
        ProxyCodecConfig { quant_step: 16 }
    }
}

impl ProxyCodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quant_step < 1 {
            return Err(Error::Config(format!(
                "quant_step must be at least 1, got {}",
                self.quant_step
            )));
        }
        Ok(())
    }
}

/// Quantized coefficients for one frame plus the rate estimate.
#[derive(Debug, Clone)]
pub struct ProxyStream {
    width: usize,
    height: usize,
    quant_step: i64,
    planes: [Vec<i32>; 3],
    pub bit_estimate: u64,
}

impl ProxyStream {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn quant_step(&self) -> i64 {
        self.quant_step
    }
}

fn padded(v: usize) -> usize {
    v.div_ceil(8) * 8
}

fn floor_log2(n: u64) -> u64 {
    63 - n.leading_zeros() as u64
}

/// Exp-Golomb-like price of one block in raster scan: every nonzero
/// coefficient costs 1 + 2*floor(log2(|q|+1)) bits, every zero run costs
/// 1 + 2*floor(log2(run+1)) bits.
fn block_bits(coeffs: &[i32; 64]) -> u64 {
    let mut bits = 0u64;
    let mut run = 0u64;
    for &q in coeffs {
        if q == 0 {
            run += 1;
        } else {
            if run > 0 {
                bits += 1 + 2 * floor_log2(run + 1);
                run = 0;
            }
            bits += 1 + 2 * floor_log2(q.unsigned_abs() as u64 + 1);
        }
    }
    if run > 0 {
        bits += 1 + 2 * floor_log2(run + 1);
    }
    bits
}

fn encode_plane(plane: &Plane, quant_step: i64) -> (Vec<i32>, u64) {
    let pw = padded(plane.width());
    let ph = padded(plane.height());
    let blocks_x = pw / 8;
    let blocks_y = ph / 8;
    let mut coeffs = Vec::with_capacity(pw * ph);
    let mut bits = 0u64;
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            let mut block = [0i64; 64];
            for r in 0..8 {
                for c in 0..8 {
                    // Edge-replicated padding.
                    let x = (bx * 8 + c).min(plane.width() - 1);
                    let y = (by * 8 + r).min(plane.height() - 1);
                    block[r * 8 + c] = plane.get(x, y) as i64 - 128;
                }
            }
            let transformed = forward_dct8(&block);
            let mut quantized = [0i32; 64];
            for (q, &c) in quantized.iter_mut().zip(&transformed) {
                // Dead-zone quantizer: truncate toward zero.
                *q = (c / quant_step) as i32;
            }
            bits += block_bits(&quantized);
            coeffs.extend_from_slice(&quantized);
        }
    }
    (coeffs, bits)
}

fn decode_plane(coeffs: &[i32], width: usize, height: usize, quant_step: i64) -> Plane {
    let pw = padded(width);
    let blocks_x = pw / 8;
    let mut out = Plane::new(width, height, 0);
    for (i, block_coeffs) in coeffs.chunks_exact(64).enumerate() {
        let bx = i % blocks_x;
        let by = i / blocks_x;
        let mut block = [0i64; 64];
        for (b, &q) in block.iter_mut().zip(block_coeffs) {
            *b = q as i64 * quant_step;
        }
        let samples = inverse_dct8(&block);
        for r in 0..8 {
            let y = by * 8 + r;
            if y >= height {
                continue;
            }
            for c in 0..8 {
                let x = bx * 8 + c;
                if x >= width {
                    continue;
                }
                out.set(x, y, (samples[r * 8 + c] + 128).clamp(0, 255) as u8);
            }
        }
    }
    out
}

/// Transforms and quantizes all three planes.
pub fn proxy_encode(frame: &Frame, config: &ProxyCodecConfig) -> Result<ProxyStream> {
    config.validate()?;
    let (y, y_bits) = encode_plane(&frame.y, config.quant_step);
    let (cb, cb_bits) = encode_plane(&frame.cb, config.quant_step);
    let (cr, cr_bits) = encode_plane(&frame.cr, config.quant_step);
    Ok(ProxyStream {
        width: frame.width(),
        height: frame.height(),
        quant_step: config.quant_step,
        planes: [y, cb, cr],
        bit_estimate: y_bits + cb_bits + cr_bits,
    })
}

/// Reconstructs a frame from quantized coefficients.
pub fn proxy_decode(stream: &ProxyStream) -> Result<Frame> {
    let (w, h) = (stream.width, stream.height);
    Frame::from_planes(
        decode_plane(&stream.planes[0], w, h, stream.quant_step),
        decode_plane(&stream.planes[1], w / 2, h / 2, stream.quant_step),
        decode_plane(&stream.planes[2], w / 2, h / 2, stream.quant_step),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize) -> Frame {
        let mut f = Frame::new(w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                f.y.set(x, y, ((x * 31 + y * 7 + (x * y) / 5) % 256) as u8);
            }
        }
        for y in 0..h / 2 {
            for x in 0..w / 2 {
                f.cb.set(x, y, ((x * 3 + y * 11) % 256) as u8);
                f.cr.set(x, y, ((x * 13 + y * 2) % 256) as u8);
            }
        }
        f
    }

    #[test]
    fn quant_step_one_is_near_lossless() {
        let f = textured(48, 32);
        let stream = proxy_encode(&f, &ProxyCodecConfig { quant_step: 1 }).unwrap();
        let back = proxy_decode(&stream).unwrap();
        for (a, b) in f.y.as_slice().iter().zip(back.y.as_slice()) {
            assert!((*a as i32 - *b as i32).abs() <= 1);
        }
        for (a, b) in f.cb.as_slice().iter().zip(back.cb.as_slice()) {
            assert!((*a as i32 - *b as i32).abs() <= 1);
        }
    }

    #[test]
    fn flat_frame_decodes_exactly_with_minimal_bits() {
        let flat = Frame::new(32, 32).unwrap(); // constant 128
        let textured = textured(32, 32);
        for step in [1i64, 4, 16, 64] {
            let cfg = ProxyCodecConfig { quant_step: step };
            let s_flat = proxy_encode(&flat, &cfg).unwrap();
            assert_eq!(proxy_decode(&s_flat).unwrap(), flat, "step {step}");
            let s_tex = proxy_encode(&textured, &cfg).unwrap();
            assert!(s_flat.bit_estimate < s_tex.bit_estimate);
        }
    }

    #[test]
    fn bit_estimate_non_increasing_in_quant_step() {
        let f = textured(64, 64);
        let mut prev = u64::MAX;
        for step in [1i64, 2, 4, 8, 16, 32, 64, 128] {
            let s = proxy_encode(&f, &ProxyCodecConfig { quant_step: step }).unwrap();
            assert!(
                s.bit_estimate <= prev,
                "step {step}: {} > {prev}",
                s.bit_estimate
            );
            prev = s.bit_estimate;
        }
    }

    #[test]
    fn odd_dimensions_pad_and_crop() {
        let f = textured(36, 28); // not multiples of 8
        let stream = proxy_encode(&f, &ProxyCodecConfig { quant_step: 1 }).unwrap();
        let back = proxy_decode(&stream).unwrap();
        assert_eq!(back.width(), 36);
        assert_eq!(back.height(), 28);
        for (a, b) in f.y.as_slice().iter().zip(back.y.as_slice()) {
            assert!((*a as i32 - *b as i32).abs() <= 1);
        }
    }

    #[test]
    fn invalid_quant_step_rejected() {
        assert!(ProxyCodecConfig { quant_step: 0 }.validate().is_err());
    }
}
