//! Film grain synthesis: pattern database construction and per-block grain
//! application on reconstructed frames.
//!
//! A pattern is a 64x64 band-limited noise block. The database holds one
//! pattern per (horizontal, vertical) cutoff pair in [2, 14], so 13x13x64x64
//! samples in total. Synthesis stamps 8x8 crops of the selected pattern onto
//! each luma block at a pseudo-random offset, scales them by the interval's
//! scaling value, smooths crop seams, and blends additively.

use rayon::prelude::*;

use crate::dct::{forward_dct64, inverse_dct64};
use crate::error::{Error, Result};
use crate::frame::{block_average, Frame, SignedPlane};
use crate::num::{round_div, round_shift};
use crate::params::{FilmGrainParams, MODEL_ID_FREQUENCY_FILTERING};
use crate::prng::{derive_seed, Prng};

/// Lowest cutoff frequency index stored in the database.
pub const CUTOFF_MIN: u8 = 2;
/// Highest cutoff frequency index stored in the database.
pub const CUTOFF_MAX: u8 = 14;
/// Patterns per axis: cutoffs 2..=14.
pub const CUTOFF_COUNT: usize = (CUTOFF_MAX - CUTOFF_MIN + 1) as usize;
/// Pattern side length in samples.
pub const PATTERN_SIZE: usize = 64;
/// Grain is applied on this block granularity.
pub const GRAIN_BLOCK: usize = 8;
/// Offsets are drawn from [0, 56] so an 8x8 read stays inside the pattern.
pub const OFFSET_RANGE: u32 = (PATTERN_SIZE - GRAIN_BLOCK + 1) as u32;

/// Number of uniform draws summed per noise sample.
const NOISE_DRAWS: u32 = 12;
/// Mean of the 12-draw sum (12 * 127.5); subtracted to centre the samples.
const NOISE_CENTER: i32 = 1530;
/// In-band coefficient magnitude after normalization. Matches the noise
/// sample standard deviation, so pattern variance scales with the surviving
/// coefficient count alone rather than with one random spectrum realization.
const COEF_MAGNITUDE: i64 = 64;

/// Synthesis-side knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthesisConfig {
    pub master_seed: u32,
    pub deblocking_enabled: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            master_seed: 1,
            deblocking_enabled: true,
        }
    }
}

/// 64x64 block of approximately Gaussian integers (Irwin-Hall sum of 12
/// uniform byte draws, centred, then divided by 4). Zero mean, variance
/// 65535/16, filled in raster order.
pub fn generate_noise_block(seed: u32) -> SignedPlane {
    let mut prng = Prng::new(seed);
    let mut out = SignedPlane::new(PATTERN_SIZE, PATTERN_SIZE);
    for y in 0..PATTERN_SIZE {
        for x in 0..PATTERN_SIZE {
            let mut acc = 0i32;
            for _ in 0..NOISE_DRAWS {
                acc += prng.next_byte() as i32;
            }
            out.set(x, y, (acc - NOISE_CENTER) >> 2);
        }
    }
    out
}

/// Zeroes every coefficient with horizontal index > `h_cutoff` or vertical
/// index > `v_cutoff`. Coefficients are indexed `[y * 64 + x]`.
pub fn low_pass_filter(coeffs: &mut [i64], h_cutoff: u8, v_cutoff: u8) -> Result<()> {
    if coeffs.len() != PATTERN_SIZE * PATTERN_SIZE {
        return Err(Error::Geometry(format!(
            "expected 4096 coefficients, got {}",
            coeffs.len()
        )));
    }
    if h_cutoff > 63 || v_cutoff > 63 {
        return Err(Error::Config(format!(
            "cutoffs must be in [0, 63], got ({h_cutoff}, {v_cutoff})"
        )));
    }
    for y in 0..PATTERN_SIZE {
        for x in 0..PATTERN_SIZE {
            if x > h_cutoff as usize || y > v_cutoff as usize {
                coeffs[y * PATTERN_SIZE + x] = 0;
            }
        }
    }
    Ok(())
}

/// All 13x13 pre-computed grain patterns, indexed by cutoff pair.
#[derive(Debug, Clone)]
pub struct GrainPatternDatabase {
    patterns: Vec<SignedPlane>,
    master_seed: u32,
}

impl GrainPatternDatabase {
    /// Builds every pattern deterministically from `master_seed`: noise block,
    /// forward DCT, in-band magnitude normalization, low-pass mask, DC
    /// removal, inverse DCT.
    pub fn build(master_seed: u32) -> Self {
        let pairs: Vec<(u8, u8)> = (CUTOFF_MIN..=CUTOFF_MAX)
            .flat_map(|h| (CUTOFF_MIN..=CUTOFF_MAX).map(move |v| (h, v)))
            .collect();
        let patterns: Vec<SignedPlane> = pairs
            .par_iter()
            .map(|&(h, v)| build_pattern(master_seed, h, v))
            .collect();
        GrainPatternDatabase {
            patterns,
            master_seed,
        }
    }

    pub fn master_seed(&self) -> u32 {
        self.master_seed
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    /// Pattern for a cutoff pair; out-of-range cutoffs clamp to [2, 14] so a
    /// hostile parameter set cannot index outside the database.
    pub fn pattern(&self, h_cutoff: i32, v_cutoff: i32) -> &SignedPlane {
        let h = h_cutoff.clamp(CUTOFF_MIN as i32, CUTOFF_MAX as i32) as usize;
        let v = v_cutoff.clamp(CUTOFF_MIN as i32, CUTOFF_MAX as i32) as usize;
        &self.patterns[(h - CUTOFF_MIN as usize) * CUTOFF_COUNT + (v - CUTOFF_MIN as usize)]
    }
}

fn build_pattern(master_seed: u32, h: u8, v: u8) -> SignedPlane {
    let noise = generate_noise_block(derive_seed(master_seed, h as u32, v as u32));
    let mut coeffs = forward_dct64(&noise).expect("noise block is 64x64");
    for c in coeffs.iter_mut() {
        *c = if *c >= 0 { COEF_MAGNITUDE } else { -COEF_MAGNITUDE };
    }
    low_pass_filter(&mut coeffs, h, v).expect("cutoffs in range");
    coeffs[0] = 0;
    inverse_dct64(&coeffs).expect("4096 coefficients")
}

/// Lowest interval index whose [lower, upper] range contains `block_avg`,
/// or `None` when no interval matches.
pub fn select_interval(
    params: &FilmGrainParams,
    component: usize,
    block_avg: u8,
) -> Result<Option<usize>> {
    if component >= 3 || !params.comp_model_present[component] {
        return Err(Error::Config(format!(
            "component {component} has no grain model"
        )));
    }
    Ok(params.intervals[component]
        .iter()
        .position(|iv| iv.lower_bound <= block_avg && block_avg <= iv.upper_bound))
}

/// Smooths the two columns (then the two rows) either side of every 8x8 crop
/// boundary of a grain contribution plane:
/// `l' = round((2l + r)/3)`, `r' = round((l + 2r)/3)`.
pub fn deblock_grain(grain: &SignedPlane) -> SignedPlane {
    let mut g = grain.clone();
    let (w, h) = (g.width(), g.height());
    let mut bx = GRAIN_BLOCK;
    while bx < w {
        for y in 0..h {
            let l = g.get(bx - 1, y) as i64;
            let r = g.get(bx, y) as i64;
            g.set(bx - 1, y, round_div(2 * l + r, 3) as i32);
            g.set(bx, y, round_div(l + 2 * r, 3) as i32);
        }
        bx += GRAIN_BLOCK;
    }
    let mut by = GRAIN_BLOCK;
    while by < h {
        for x in 0..w {
            let t = g.get(x, by - 1) as i64;
            let b = g.get(x, by) as i64;
            g.set(x, by - 1, round_div(2 * t + b, 3) as i32);
            g.set(x, by, round_div(t + 2 * b, 3) as i32);
        }
        by += GRAIN_BLOCK;
    }
    g
}

/// Computes the luma grain contribution plane for one frame without blending.
pub(crate) fn grain_plane(
    decoded: &Frame,
    params: &FilmGrainParams,
    db: &GrainPatternDatabase,
    frame_index: u32,
    config: &SynthesisConfig,
) -> Result<SignedPlane> {
    let (w, h) = (decoded.width(), decoded.height());
    let blocks_x = w.div_ceil(GRAIN_BLOCK);
    let blocks_y = h.div_ceil(GRAIN_BLOCK);

    let rows: Vec<Vec<i32>> = (0..blocks_y)
        .into_par_iter()
        .map(|by| {
            let row_h = (h - by * GRAIN_BLOCK).min(GRAIN_BLOCK);
            let mut row = vec![0i32; w * row_h];
            for bx in 0..blocks_x {
                let x0 = bx * GRAIN_BLOCK;
                let y0 = by * GRAIN_BLOCK;
                let avg = block_average(&decoded.y, x0, y0, GRAIN_BLOCK)
                    .expect("block origin in bounds");
                let Some(index) = select_interval(params, 0, avg)? else {
                    continue;
                };
                let interval = &params.intervals[0][index];
                let pattern = db.pattern(interval.h_cutoff, interval.v_cutoff);
                let mut prng = Prng::new(derive_seed(
                    config.master_seed ^ frame_index,
                    bx as u32,
                    by as u32,
                ));
                let ox = prng.next_mod(OFFSET_RANGE) as usize;
                let oy = prng.next_mod(OFFSET_RANGE) as usize;
                let scale = interval.scaling_value as i64;
                let shift = params.log2_scale_factor as u32;
                let block_w = (w - x0).min(GRAIN_BLOCK);
                for r in 0..row_h {
                    for c in 0..block_w {
                        let p = pattern.get(ox + c, oy + r) as i64;
                        let g = if shift == 0 {
                            p * scale
                        } else {
                            round_shift(p * scale, shift)
                        };
                        row[r * w + x0 + c] = g as i32;
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut plane = SignedPlane::new(w, h);
    for (by, row) in rows.iter().enumerate() {
        let y0 = by * GRAIN_BLOCK;
        let row_h = row.len() / w;
        for r in 0..row_h {
            for x in 0..w {
                plane.set(x, y0 + r, row[r * w + x]);
            }
        }
    }
    if config.deblocking_enabled {
        plane = deblock_grain(&plane);
    }
    Ok(plane)
}

/// Adds synthesized grain to a decoded frame. Output depends only on the
/// frame content, the parameters, the database and `(master_seed,
/// frame_index)`, never on processing order. Chroma passes through.
pub fn apply_grain(
    decoded: &Frame,
    params: &FilmGrainParams,
    db: &GrainPatternDatabase,
    frame_index: u32,
    config: &SynthesisConfig,
) -> Result<Frame> {
    if params.cancel_flag {
        return Ok(decoded.clone());
    }
    if params.model_id != MODEL_ID_FREQUENCY_FILTERING {
        return Err(Error::UnsupportedModel(params.model_id));
    }
    if db.master_seed() != config.master_seed {
        return Err(Error::Config(format!(
            "database seed {} does not match config seed {}",
            db.master_seed(),
            config.master_seed
        )));
    }
    if !params.comp_model_present[0] {
        return Ok(decoded.clone());
    }

    let grain = grain_plane(decoded, params, db, frame_index, config)?;
    let mut out = decoded.clone();
    let (w, h) = (decoded.width(), decoded.height());
    for y in 0..h {
        for x in 0..w {
            let v = decoded.y.get(x, y) as i32 + grain.get(x, y);
            out.y.set(x, y, v.clamp(0, 255) as u8);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::IntensityInterval;

    #[test]
    fn noise_block_is_deterministic() {
        assert_eq!(generate_noise_block(7), generate_noise_block(7));
    }

    #[test]
    fn different_seeds_differ_almost_everywhere() {
        let a = generate_noise_block(1);
        let b = generate_noise_block(2);
        let differing = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .filter(|(x, y)| x != y)
            .count();
        assert!(
            differing as f64 >= 0.90 * 4096.0,
            "only {differing} of 4096 samples differ"
        );
    }

    #[test]
    fn noise_statistics_match_construction() {
        let mut sum = 0f64;
        let mut sum_sq = 0f64;
        let mut n = 0f64;
        for seed in 1..=100 {
            for &v in generate_noise_block(seed).as_slice() {
                sum += v as f64;
                sum_sq += (v as f64) * (v as f64);
                n += 1.0;
            }
        }
        let mean = sum / n;
        let var = sum_sq / n - mean * mean;
        // 12 uniform byte draws: variance 12*(256^2-1)/12, then /16 after the
        // divide-by-4.
        let predicted = 65535.0 / 16.0;
        assert!(mean.abs() <= 1.0, "noise mean {mean}");
        assert!(
            (var - predicted).abs() <= 0.15 * predicted,
            "noise variance {var} vs predicted {predicted}"
        );
    }

    #[test]
    fn low_pass_full_range_is_identity() {
        let mut coeffs: Vec<i64> = (0..4096).map(|i| i as i64 - 2048).collect();
        let expect = coeffs.clone();
        low_pass_filter(&mut coeffs, 63, 63).unwrap();
        assert_eq!(coeffs, expect);
    }

    #[test]
    fn low_pass_zero_keeps_only_dc() {
        let mut coeffs = vec![5i64; 4096];
        low_pass_filter(&mut coeffs, 0, 0).unwrap();
        assert_eq!(coeffs[0], 5);
        assert!(coeffs[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn low_pass_8_8_keeps_81_positions() {
        let mut coeffs = vec![1i64; 4096];
        low_pass_filter(&mut coeffs, 8, 8).unwrap();
        assert_eq!(coeffs.iter().filter(|&&c| c != 0).count(), 81);
        for y in 0..64 {
            for x in 0..64 {
                let expect = if x > 8 || y > 8 { 0 } else { 1 };
                assert_eq!(coeffs[y * 64 + x], expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn database_has_169_patterns_with_zero_mean() {
        let db = GrainPatternDatabase::build(1);
        assert_eq!(db.pattern_count(), 169);
        for h in CUTOFF_MIN..=CUTOFF_MAX {
            for v in CUTOFF_MIN..=CUTOFF_MAX {
                let p = db.pattern(h as i32, v as i32);
                assert_eq!(p.width(), 64);
                assert_eq!(p.height(), 64);
                let mean: f64 =
                    p.as_slice().iter().map(|&v| v as f64).sum::<f64>() / 4096.0;
                assert!(mean.abs() <= 1.0, "pattern ({h},{v}) mean {mean}");
            }
        }
    }

    #[test]
    fn smooth_pattern_lacks_high_frequency_energy() {
        let db = GrainPatternDatabase::build(1);
        let hf_energy = |p: &SignedPlane| {
            let co = forward_dct64(p).unwrap();
            let mut hf = 0f64;
            let mut total = 0f64;
            for y in 0..64 {
                for x in 0..64 {
                    let e = (co[y * 64 + x] as f64).powi(2);
                    total += e;
                    if x > 8 || y > 8 {
                        hf += e;
                    }
                }
            }
            hf / total
        };
        let smooth = hf_energy(db.pattern(2, 2));
        let fine = hf_energy(db.pattern(14, 14));
        assert!(smooth < 0.05, "pattern (2,2) high-frequency ratio {smooth}");
        assert!(fine > 0.3, "pattern (14,14) high-frequency ratio {fine}");
    }

    fn params_with_intervals(intervals: Vec<IntensityInterval>) -> FilmGrainParams {
        FilmGrainParams {
            cancel_flag: false,
            model_id: 0,
            blending_mode_id: 0,
            log2_scale_factor: 5,
            comp_model_present: [true, false, false],
            intervals: [intervals, Vec::new(), Vec::new()],
            persistence_flag: false,
        }
    }

    #[test]
    fn select_interval_boundary_and_first_match() {
        let p = params_with_intervals(vec![
            IntensityInterval {
                lower_bound: 0,
                upper_bound: 99,
                scaling_value: 1,
                h_cutoff: 8,
                v_cutoff: 8,
            },
            IntensityInterval {
                lower_bound: 100,
                upper_bound: 255,
                scaling_value: 1,
                h_cutoff: 8,
                v_cutoff: 8,
            },
        ]);
        assert_eq!(select_interval(&p, 0, 100).unwrap(), Some(1));
        let p1 = params_with_intervals(vec![IntensityInterval {
            lower_bound: 0,
            upper_bound: 100,
            scaling_value: 1,
            h_cutoff: 8,
            v_cutoff: 8,
        }]);
        assert_eq!(select_interval(&p1, 0, 255).unwrap(), None);
        let overlapping = params_with_intervals(vec![
            IntensityInterval {
                lower_bound: 0,
                upper_bound: 200,
                scaling_value: 1,
                h_cutoff: 8,
                v_cutoff: 8,
            },
            IntensityInterval {
                lower_bound: 150,
                upper_bound: 255,
                scaling_value: 1,
                h_cutoff: 8,
                v_cutoff: 8,
            },
        ]);
        assert_eq!(select_interval(&overlapping, 0, 160).unwrap(), Some(0));
        assert!(select_interval(&overlapping, 1, 160).is_err());
    }

    #[test]
    fn deblock_constant_plane_unchanged() {
        let mut g = SignedPlane::new(32, 32);
        for v in g.as_mut_slice() {
            *v = 9;
        }
        assert_eq!(deblock_grain(&g), g);
    }

    #[test]
    fn deblock_boundary_arithmetic() {
        let mut g = SignedPlane::new(16, 8);
        for y in 0..8 {
            for x in 0..8 {
                g.set(x, y, 30);
            }
        }
        let d = deblock_grain(&g);
        for y in 0..8 {
            assert_eq!(d.get(7, y), 20); // (2*30 + 0)/3
            assert_eq!(d.get(8, y), 10); // (30 + 2*0)/3
        }
    }

    #[test]
    fn deblock_reduces_boundary_contrast() {
        let db = GrainPatternDatabase::build(1);
        let decoded = Frame::new(64, 64).unwrap();
        let params = params_with_intervals(vec![IntensityInterval {
            lower_bound: 0,
            upper_bound: 255,
            scaling_value: 64,
            h_cutoff: 8,
            v_cutoff: 8,
        }]);
        let cfg = SynthesisConfig::default();
        let raw = grain_plane(&decoded, &params, &db, 0, &SynthesisConfig {
            deblocking_enabled: false,
            ..cfg
        })
        .unwrap();
        let smoothed = deblock_grain(&raw);
        let jump = |g: &SignedPlane| {
            let mut worst = 0f64;
            let mut bx = GRAIN_BLOCK;
            while bx < g.width() {
                let mut l = 0f64;
                let mut r = 0f64;
                for y in 0..g.height() {
                    l += g.get(bx - 1, y) as f64;
                    r += g.get(bx, y) as f64;
                }
                worst = worst.max((l - r).abs() / g.height() as f64);
                bx += GRAIN_BLOCK;
            }
            worst
        };
        assert!(jump(&smoothed) <= jump(&raw));
    }

    #[test]
    fn apply_grain_cancel_copies_input() {
        let db = GrainPatternDatabase::build(1);
        let decoded = Frame::new(32, 32).unwrap();
        let out = apply_grain(
            &decoded,
            &FilmGrainParams::cancelled(),
            &db,
            0,
            &SynthesisConfig::default(),
        )
        .unwrap();
        assert_eq!(out, decoded);
    }

    #[test]
    fn apply_grain_zero_scaling_copies_input() {
        let db = GrainPatternDatabase::build(1);
        let decoded = Frame::new(32, 32).unwrap();
        let params = params_with_intervals(vec![IntensityInterval {
            lower_bound: 0,
            upper_bound: 255,
            scaling_value: 0,
            h_cutoff: 8,
            v_cutoff: 8,
        }]);
        let out = apply_grain(&decoded, &params, &db, 0, &SynthesisConfig::default()).unwrap();
        assert_eq!(out, decoded);
    }

    #[test]
    fn apply_grain_is_deterministic() {
        let db = GrainPatternDatabase::build(1);
        let mut decoded = Frame::new(48, 48).unwrap();
        for y in 0..48 {
            for x in 0..48 {
                decoded.y.set(x, y, (60 + x * 2 + y) as u8);
            }
        }
        let params = params_with_intervals(vec![IntensityInterval {
            lower_bound: 0,
            upper_bound: 255,
            scaling_value: 48,
            h_cutoff: 10,
            v_cutoff: 6,
        }]);
        let a = apply_grain(&decoded, &params, &db, 5, &SynthesisConfig::default()).unwrap();
        let b = apply_grain(&decoded, &params, &db, 5, &SynthesisConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, decoded);
        // A different frame index moves the offsets.
        let c = apply_grain(&decoded, &params, &db, 6, &SynthesisConfig::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn apply_grain_rejects_unknown_model() {
        let db = GrainPatternDatabase::build(1);
        let decoded = Frame::new(16, 16).unwrap();
        let mut params = params_with_intervals(vec![IntensityInterval {
            lower_bound: 0,
            upper_bound: 255,
            scaling_value: 10,
            h_cutoff: 8,
            v_cutoff: 8,
        }]);
        params.model_id = 1;
        let err = apply_grain(&decoded, &params, &db, 0, &SynthesisConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedModel(1)));
    }
}
