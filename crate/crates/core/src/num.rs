//! Shared integer rounding helpers.
//!
//! All integer division in this crate rounds to nearest with ties away from
//! zero, so results are identical across platforms.

/// Divides `num` by `den` (den > 0), rounding to nearest, ties away from zero.
#[inline]
pub fn round_div(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    if num >= 0 {
        (num + den / 2) / den
    } else {
        -((-num + den / 2) / den)
    }
}

/// Right-shifts `v` by `shift` with rounding to nearest, ties away from zero.
#[inline]
pub fn round_shift(v: i64, shift: u32) -> i64 {
    let half = 1i64 << (shift - 1);
    if v >= 0 {
        (v + half) >> shift
    } else {
        -((-v + half) >> shift)
    }
}

/// Rounds a non-negative real to the nearest integer, ties up.
#[inline]
pub fn round_f64(v: f64) -> i64 {
    if v >= 0.0 {
        (v + 0.5).floor() as i64
    } else {
        (v - 0.5).ceil() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_away_from_zero() {
        assert_eq!(round_div(1, 2), 1);
        assert_eq!(round_div(-1, 2), -1);
        assert_eq!(round_div(3, 2), 2);
        assert_eq!(round_div(-3, 2), -2);
        assert_eq!(round_div(510, 4), 128);
        assert_eq!(round_shift(-64, 7), -1);
        assert_eq!(round_shift(64, 7), 1);
        assert_eq!(round_shift(63, 7), 0);
        assert_eq!(round_f64(0.5), 1);
        assert_eq!(round_f64(-0.5), -1);
        assert_eq!(round_f64(2.4), 2);
    }

    #[test]
    fn matches_float_reference() {
        for num in -1000i64..=1000 {
            for den in [1i64, 2, 3, 4, 7, 128] {
                let expect = {
                    let q = num as f64 / den as f64;
                    if q >= 0.0 {
                        (q + 0.5).floor() as i64
                    } else {
                        (q - 0.5).ceil() as i64
                    }
                };
                assert_eq!(round_div(num, den), expect, "{num}/{den}");
            }
        }
    }
}
