//! Integer approximations of the type-II/III DCT for 8- and 64-point blocks.
//!
//! The coefficient table is `c[k][n] = round(s_k * cos(pi*(2n+1)*k/(2N)) * 2^12)`
//! with `s_0 = sqrt(1/N)`, `s_k = sqrt(2/N)`. Each 2-D transform runs two 1-D
//! passes over i64 accumulators; the first pass descales by `2^(12-6)` and the
//! second by `2^(12+6)`, keeping six guard bits in the intermediate so the
//! forward/inverse round trip stays within one LSB.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::frame::SignedPlane;
use crate::num::round_shift;

/// Table scale: entries are orthonormal basis values times 2^12.
pub const TABLE_SHIFT: u32 = 12;
/// Guard bits kept between the two 1-D passes.
pub const GUARD_BITS: u32 = 6;

const PASS1_SHIFT: u32 = TABLE_SHIFT - GUARD_BITS;
const PASS2_SHIFT: u32 = TABLE_SHIFT + GUARD_BITS;

fn build_table(n: usize) -> Vec<i64> {
    let mut t = vec![0i64; n * n];
    for k in 0..n {
        let s = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for x in 0..n {
            let c = (std::f64::consts::PI * (2 * x + 1) as f64 * k as f64 / (2 * n) as f64).cos();
            t[k * n + x] = (s * c * (1u64 << TABLE_SHIFT) as f64).round() as i64;
        }
    }
    t
}

fn table64() -> &'static [i64] {
    static T: OnceLock<Vec<i64>> = OnceLock::new();
    T.get_or_init(|| build_table(64))
}

fn table8() -> &'static [i64] {
    static T: OnceLock<Vec<i64>> = OnceLock::new();
    T.get_or_init(|| build_table(8))
}

/// out[k][j] = descale(sum_n t[k][n] * src[n][j]): 1-D transform down columns.
fn pass_rows(t: &[i64], src: &[i64], n: usize, shift: u32, out: &mut [i64]) {
    for k in 0..n {
        let trow = &t[k * n..(k + 1) * n];
        for j in 0..n {
            let mut acc = 0i64;
            for x in 0..n {
                acc += trow[x] * src[x * n + j];
            }
            out[k * n + j] = round_shift(acc, shift);
        }
    }
}

/// out[i][k] = descale(sum_n src[i][n] * t[k][n]): 1-D transform along rows.
fn pass_cols(t: &[i64], src: &[i64], n: usize, shift: u32, out: &mut [i64]) {
    for i in 0..n {
        let srow = &src[i * n..(i + 1) * n];
        for k in 0..n {
            let trow = &t[k * n..(k + 1) * n];
            let mut acc = 0i64;
            for x in 0..n {
                acc += srow[x] * trow[x];
            }
            out[i * n + k] = round_shift(acc, shift);
        }
    }
}

/// Inverse column pass: out[x][j] = descale(sum_k t[k][x] * src[k][j]).
fn ipass_rows(t: &[i64], src: &[i64], n: usize, shift: u32, out: &mut [i64]) {
    for x in 0..n {
        for j in 0..n {
            let mut acc = 0i64;
            for k in 0..n {
                acc += t[k * n + x] * src[k * n + j];
            }
            out[x * n + j] = round_shift(acc, shift);
        }
    }
}

/// Inverse row pass: out[i][x] = descale(sum_k src[i][k] * t[k][x]).
fn ipass_cols(t: &[i64], src: &[i64], n: usize, shift: u32, out: &mut [i64]) {
    for i in 0..n {
        let srow = &src[i * n..(i + 1) * n];
        for x in 0..n {
            let mut acc = 0i64;
            for k in 0..n {
                acc += srow[k] * t[k * n + x];
            }
            out[i * n + x] = round_shift(acc, shift);
        }
    }
}

fn forward(t: &[i64], samples: &[i64], n: usize) -> Vec<i64> {
    let mut tmp = vec![0i64; n * n];
    let mut out = vec![0i64; n * n];
    pass_cols(t, samples, n, PASS1_SHIFT, &mut tmp);
    pass_rows(t, &tmp, n, PASS2_SHIFT, &mut out);
    out
}

fn inverse(t: &[i64], coeffs: &[i64], n: usize) -> Vec<i64> {
    let mut tmp = vec![0i64; n * n];
    let mut out = vec![0i64; n * n];
    ipass_rows(t, coeffs, n, PASS1_SHIFT, &mut tmp);
    ipass_cols(t, &tmp, n, PASS2_SHIFT, &mut out);
    out
}

/// Forward 64-point 2-D DCT. Coefficients are indexed `[y * 64 + x]` with `x`
/// the horizontal and `y` the vertical frequency.
pub fn forward_dct64(block: &SignedPlane) -> Result<Vec<i64>> {
    if block.width() != 64 || block.height() != 64 {
        return Err(Error::Geometry(format!(
            "forward_dct64 needs a 64x64 block, got {}x{}",
            block.width(),
            block.height()
        )));
    }
    let samples: Vec<i64> = block.as_slice().iter().map(|&v| v as i64).collect();
    Ok(forward(table64(), &samples, 64))
}

/// Inverse 64-point 2-D DCT.
pub fn inverse_dct64(coeffs: &[i64]) -> Result<SignedPlane> {
    if coeffs.len() != 64 * 64 {
        return Err(Error::Geometry(format!(
            "inverse_dct64 needs 4096 coefficients, got {}",
            coeffs.len()
        )));
    }
    let out = inverse(table64(), coeffs, 64);
    SignedPlane::from_vec(out.iter().map(|&v| v as i32).collect(), 64, 64)
}

/// Forward 8-point 2-D DCT over an 8x8 block of signed samples.
pub fn forward_dct8(samples: &[i64; 64]) -> [i64; 64] {
    let out = forward(table8(), samples, 8);
    let mut arr = [0i64; 64];
    arr.copy_from_slice(&out);
    arr
}

/// Inverse 8-point 2-D DCT.
pub fn inverse_dct8(coeffs: &[i64; 64]) -> [i64; 64] {
    let out = inverse(table8(), coeffs, 8);
    let mut arr = [0i64; 64];
    arr.copy_from_slice(&out);
    arr
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen table spot checks; any platform drift in table construction
    // would show up here before it corrupts pattern databases.
    #[test]
    fn table_values_are_frozen() {
        let t = table64();
        assert_eq!(t[0], 512); // k=0: sqrt(1/64)*2^12
        assert_eq!(t[64], 724); // k=1, x=0: sqrt(2/64)*cos(pi/128)*2^12
        assert_eq!(t[64 + 63], -724);
        let sum: i64 = t.iter().map(|v| v.abs()).sum();
        assert_eq!(sum, 1_897_664);

        let t8 = table8();
        assert_eq!(t8[0], 1448);
        assert_eq!(t8[8], 2009); // k=1, x=0: 0.5*cos(pi/16)*2^12
        let sum8: i64 = t8.iter().map(|v| v.abs()).sum();
        assert_eq!(sum8, 86_576);
    }

    #[test]
    fn zero_block_maps_to_zero() {
        let z = SignedPlane::new(64, 64);
        let co = forward_dct64(&z).unwrap();
        assert!(co.iter().all(|&c| c == 0));
        let back = inverse_dct64(&co).unwrap();
        assert!(back.as_slice().iter().all(|&v| v == 0));
    }

    #[test]
    fn constant_block_concentrates_in_dc() {
        let mut b = SignedPlane::new(64, 64);
        for y in 0..64 {
            for x in 0..64 {
                b.set(x, y, 64);
            }
        }
        let co = forward_dct64(&b).unwrap();
        assert_eq!(co[0], 4096); // 64 * mean
        for (i, &c) in co.iter().enumerate().skip(1) {
            assert!(c.abs() <= 1, "coefficient {i} = {c}");
        }
    }

    #[test]
    fn round_trip_within_one_lsb() {
        let mut state = 0x1234_5678u64;
        let mut rand = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as i64 % 256) - 128
        };
        for _ in 0..20 {
            let mut b = SignedPlane::new(64, 64);
            for y in 0..64 {
                for x in 0..64 {
                    b.set(x, y, rand() as i32);
                }
            }
            let back = inverse_dct64(&forward_dct64(&b).unwrap()).unwrap();
            for (a, z) in b.as_slice().iter().zip(back.as_slice()) {
                assert!((a - z).abs() <= 1, "{a} vs {z}");
            }
        }
    }

    #[test]
    fn dct8_round_trip_within_one_lsb() {
        let mut state = 0x9999u64;
        let mut rand = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as i64 % 256) - 128
        };
        for _ in 0..200 {
            let mut b = [0i64; 64];
            for v in b.iter_mut() {
                *v = rand();
            }
            let back = inverse_dct8(&forward_dct8(&b));
            for (a, z) in b.iter().zip(back.iter()) {
                assert!((a - z).abs() <= 1, "{a} vs {z}");
            }
        }
    }

    #[test]
    fn wrong_dimensions_rejected() {
        let b = SignedPlane::new(32, 64);
        assert!(forward_dct64(&b).is_err());
        assert!(inverse_dct64(&[0i64; 100]).is_err());
    }
}
