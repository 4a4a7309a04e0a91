//! Film grain analysis: residual extraction and estimation of the grain
//! parameters (cutoff pair, intensity intervals, scaling values) that a
//! film grain characteristics message carries.
//!
//! Cutoffs are read from the residual's tile spectrum by matching against
//! reference curves measured from the pattern database's own synthesis
//! output. Synthesized grain is a mosaic of independent 8x8 crops, which
//! smears the band edge across neighbouring frequencies; matching measured
//! marginals against mosaic references classifies the cutoff pair reliably
//! where a fixed cumulative-energy threshold cannot. A second pass
//! re-synthesizes the neighbourhood of the first match at the measured gain
//! so quantization effects are present on both sides of the comparison.

use rayon::prelude::*;

use crate::dct::forward_dct64;
use crate::error::{Error, Result};
use crate::frame::{block_average, Frame, SignedPlane};
use crate::num::round_f64;
use crate::params::{FilmGrainParams, IntensityInterval};
use crate::synthesis::{
    grain_plane, GrainPatternDatabase, SynthesisConfig, CUTOFF_COUNT, CUTOFF_MAX, CUTOFF_MIN,
    GRAIN_BLOCK, PATTERN_SIZE,
};

/// Signed original-minus-denoised luma differences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualFrame {
    pub luma: SignedPlane,
}

impl ResidualFrame {
    pub fn width(&self) -> usize {
        self.luma.width()
    }

    pub fn height(&self) -> usize {
        self.luma.height()
    }
}

/// Per-sample luma difference `original - denoised`, exact integer arithmetic.
pub fn compute_residual(original: &Frame, denoised: &Frame) -> Result<ResidualFrame> {
    original.check_same_geometry(denoised)?;
    let (w, h) = (original.width(), original.height());
    let mut luma = SignedPlane::new(w, h);
    for y in 0..h {
        for x in 0..w {
            luma.set(x, y, original.y.get(x, y) as i32 - denoised.y.get(x, y) as i32);
        }
    }
    Ok(ResidualFrame { luma })
}

/// Analyzer knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerConfig {
    /// Number of equal-width candidate intensity bins over [0, 255].
    pub max_intervals: usize,
    /// Bins holding fewer than this fraction of blocks are dropped.
    pub min_bin_fraction: f64,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig {
            max_intervals: 8,
            min_bin_fraction: 0.005,
        }
    }
}

/// Marginal-curve length used for matching; bands never extend past index 31.
const CURVE_LEN: usize = 32;
/// Reference mosaics are this size: 3x2 spectrum tiles.
const REF_WIDTH: usize = 192;
const REF_HEIGHT: usize = 128;
/// Reference gain for calibration mosaics: scaling 64 at shift 5.
const REF_SCALING: i32 = 64;
const REF_LOG2_SCALE: u8 = 5;
const REF_GAIN: f64 = 2.0;
/// Frame indices of the first-pass reference mosaics.
const REF_INDICES_COARSE: [u32; 3] = [0x0101, 0x0202, 0x0404];
/// Frame indices of the gain-matched refinement mosaics.
const REF_INDICES_REFINE: [u32; 4] = [0x0303, 0x0505, 0x0606, 0x0707];
/// Refinement searches this far around the first-pass match.
const REFINE_RADIUS: i32 = 2;
/// log2_scale_factor search range for analyzer output.
const LOG2_SCALE_MIN: u8 = 2;
const LOG2_SCALE_MAX: u8 = 7;

#[derive(Debug, Clone)]
struct CurvePair {
    col: [f64; CURVE_LEN],
    row: [f64; CURVE_LEN],
}

/// Grain parameter estimator bound to a pattern database.
///
/// Construction measures, once per database, the reference spectra and the
/// per-cutoff-pair unit gain (the grain standard deviation produced by one
/// unit of `scaling_value / 2^log2_scale_factor`, measured through the full
/// synthesis path including offsets, rounding and deblocking).
pub struct Analyzer<'a> {
    db: &'a GrainPatternDatabase,
    config: AnalyzerConfig,
    templates: Vec<CurvePair>,
    unit_gains: Vec<f64>,
}

impl<'a> Analyzer<'a> {
    pub fn new(db: &'a GrainPatternDatabase) -> Self {
        Self::with_config(db, AnalyzerConfig::default())
    }

    pub fn with_config(db: &'a GrainPatternDatabase, config: AnalyzerConfig) -> Self {
        let pairs: Vec<(u8, u8)> = (CUTOFF_MIN..=CUTOFF_MAX)
            .flat_map(|h| (CUTOFF_MIN..=CUTOFF_MAX).map(move |v| (h, v)))
            .collect();
        let calibrated: Vec<(CurvePair, f64)> = pairs
            .par_iter()
            .map(|&(h, v)| {
                let mut spectrum = [0f64; PATTERN_SIZE * PATTERN_SIZE];
                let mut sd_sum = 0f64;
                let mut sd_count = 0usize;
                for &index in &REF_INDICES_COARSE {
                    let mosaic =
                        reference_mosaic(db, h as i32, v as i32, REF_SCALING, REF_LOG2_SCALE, index);
                    accumulate_power_spectrum(&mosaic, &mut spectrum);
                    let (sum, count) = block_sd_sum(&mosaic);
                    sd_sum += sum;
                    sd_count += count;
                }
                let tiles = (REF_WIDTH / PATTERN_SIZE)
                    * (REF_HEIGHT / PATTERN_SIZE)
                    * REF_INDICES_COARSE.len();
                for v in spectrum.iter_mut() {
                    *v /= tiles as f64;
                }
                let unit_gain = sd_sum / sd_count as f64 / REF_GAIN;
                (curves_from_spectrum(&spectrum), unit_gain)
            })
            .collect();
        let mut templates = Vec::with_capacity(calibrated.len());
        let mut unit_gains = Vec::with_capacity(calibrated.len());
        for (curve, gain) in calibrated {
            templates.push(curve);
            unit_gains.push(gain);
        }
        Analyzer {
            db,
            config,
            templates,
            unit_gains,
        }
    }

    pub fn config(&self) -> &AnalyzerConfig {
        &self.config
    }

    /// Grain standard deviation produced per unit of effective scaling for
    /// the given cutoff pair.
    pub fn unit_gain(&self, h_cutoff: u8, v_cutoff: u8) -> f64 {
        self.unit_gains[pair_index(h_cutoff, v_cutoff)]
    }

    /// Estimates the cutoff pair of the grain carried by a residual frame.
    pub fn estimate_cutoffs(&self, residual: &ResidualFrame) -> Result<(u8, u8)> {
        if residual.width() < PATTERN_SIZE || residual.height() < PATTERN_SIZE {
            return Err(Error::FrameTooSmall {
                width: residual.width(),
                height: residual.height(),
            });
        }
        let spectrum = mean_power_spectrum(&residual.luma);
        if spectrum.iter().all(|&v| v == 0.0) {
            return Ok((CUTOFF_MIN, CUTOFF_MIN));
        }
        let measured = curves_from_spectrum(&spectrum);

        // First pass: nearest reference curve at the calibration gain.
        let coarse = self
            .templates
            .iter()
            .enumerate()
            .map(|(i, t)| (i, curve_distance(&measured, t)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .expect("template set is non-empty");
        let coarse_h = (coarse / CUTOFF_COUNT) as i32 + CUTOFF_MIN as i32;
        let coarse_v = (coarse % CUTOFF_COUNT) as i32 + CUTOFF_MIN as i32;

        let (sd_sum, sd_count) = block_sd_sum(&residual.luma);
        let mean_sd = sd_sum / sd_count.max(1) as f64;
        if mean_sd <= 0.0 {
            return Ok((coarse_h as u8, coarse_v as u8));
        }

        // Second pass: re-synthesize the neighbourhood at the measured gain
        // and pick the closest mosaic spectrum.
        let mut candidates = Vec::new();
        for h in (coarse_h - REFINE_RADIUS).max(CUTOFF_MIN as i32)
            ..=(coarse_h + REFINE_RADIUS).min(CUTOFF_MAX as i32)
        {
            for v in (coarse_v - REFINE_RADIUS).max(CUTOFF_MIN as i32)
                ..=(coarse_v + REFINE_RADIUS).min(CUTOFF_MAX as i32)
            {
                candidates.push((h as u8, v as u8));
            }
        }
        let distances: Vec<f64> = candidates
            .par_iter()
            .map(|&(h, v)| {
                let gain = mean_sd / self.unit_gain(h, v);
                let scaling = round_f64(gain * (1 << REF_LOG2_SCALE) as f64).clamp(1, 1024) as i32;
                let mut spectrum = [0f64; PATTERN_SIZE * PATTERN_SIZE];
                for &index in &REF_INDICES_REFINE {
                    let mosaic =
                        reference_mosaic(self.db, h as i32, v as i32, scaling, REF_LOG2_SCALE, index);
                    accumulate_power_spectrum(&mosaic, &mut spectrum);
                }
                let tiles = (REF_WIDTH / PATTERN_SIZE)
                    * (REF_HEIGHT / PATTERN_SIZE)
                    * REF_INDICES_REFINE.len();
                for v in spectrum.iter_mut() {
                    *v /= tiles as f64;
                }
                curve_distance(&measured, &curves_from_spectrum(&spectrum))
            })
            .collect();
        let best = distances
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("candidate set is non-empty");
        Ok(candidates[best])
    }

    /// Builds the intensity-interval model: per 8x8 block, pair the denoised
    /// block average with the residual standard deviation, bucket the
    /// intensity axis, and emit one interval per surviving bin.
    pub fn estimate_intensity_model(
        &self,
        denoised: &Frame,
        residual: &ResidualFrame,
        h_cutoff: u8,
        v_cutoff: u8,
        max_intervals: usize,
    ) -> Result<FilmGrainParams> {
        if denoised.width() != residual.width() || denoised.height() != residual.height() {
            return Err(Error::Geometry(
                "denoised frame and residual dimensions differ".into(),
            ));
        }
        if !(1..=256).contains(&max_intervals) {
            return Err(Error::Config(format!(
                "max_intervals must be in [1, 256], got {max_intervals}"
            )));
        }

        let (w, h) = (denoised.width(), denoised.height());
        let blocks_x = w.div_ceil(GRAIN_BLOCK);
        let blocks_y = h.div_ceil(GRAIN_BLOCK);
        let total_blocks = blocks_x * blocks_y;

        let mut bin_sum = vec![0f64; max_intervals];
        let mut bin_count = vec![0usize; max_intervals];
        for by in 0..blocks_y {
            for bx in 0..blocks_x {
                let x0 = bx * GRAIN_BLOCK;
                let y0 = by * GRAIN_BLOCK;
                let avg = block_average(&denoised.y, x0, y0, GRAIN_BLOCK)?;
                let sd = block_sd(&residual.luma, x0, y0);
                let bin = ((avg as usize * max_intervals) / 256).min(max_intervals - 1);
                bin_sum[bin] += sd;
                bin_count[bin] += 1;
            }
        }

        let keep: Vec<usize> = (0..max_intervals)
            .filter(|&b| {
                bin_count[b] > 0
                    && bin_count[b] as f64 >= self.config.min_bin_fraction * total_blocks as f64
            })
            .collect();
        if keep.is_empty() {
            return Ok(FilmGrainParams::cancelled());
        }

        let unit_gain = self.unit_gain(h_cutoff, v_cutoff);
        let bin_gain: Vec<f64> = keep
            .iter()
            .map(|&b| bin_sum[b] / bin_count[b] as f64 / unit_gain)
            .collect();

        // Largest shift in [2, 7] keeping every scaling value within 8 bits.
        let mut log2_scale = LOG2_SCALE_MIN;
        for shift in (LOG2_SCALE_MIN..=LOG2_SCALE_MAX).rev() {
            if bin_gain
                .iter()
                .all(|g| round_f64(g * (1u32 << shift) as f64) <= 255)
            {
                log2_scale = shift;
                break;
            }
        }

        let intervals: Vec<IntensityInterval> = keep
            .iter()
            .zip(&bin_gain)
            .map(|(&b, &g)| {
                let lower = (b * 256 / max_intervals) as u8;
                let upper = if b == max_intervals - 1 {
                    255
                } else {
                    ((b + 1) * 256 / max_intervals - 1) as u8
                };
                IntensityInterval {
                    lower_bound: lower,
                    upper_bound: upper,
                    scaling_value: round_f64(g * (1u32 << log2_scale) as f64).clamp(0, 255) as i32,
                    h_cutoff: h_cutoff as i32,
                    v_cutoff: v_cutoff as i32,
                }
            })
            .collect();

        if intervals.iter().all(|iv| iv.scaling_value == 0) {
            return Ok(FilmGrainParams::cancelled());
        }

        Ok(FilmGrainParams {
            cancel_flag: false,
            model_id: 0,
            blending_mode_id: 0,
            log2_scale_factor: log2_scale,
            comp_model_present: [true, false, false],
            intervals: [intervals, Vec::new(), Vec::new()],
            persistence_flag: false,
        })
    }

    /// Full per-frame analysis: residual, cutoffs, intensity model.
    pub fn analyze_frame(&self, original: &Frame, denoised: &Frame) -> Result<FilmGrainParams> {
        let residual = compute_residual(original, denoised)?;
        if residual.luma.as_slice().iter().all(|&v| v == 0) {
            return Ok(FilmGrainParams::cancelled());
        }
        let (h_cutoff, v_cutoff) = self.estimate_cutoffs(&residual)?;
        self.estimate_intensity_model(
            denoised,
            &residual,
            h_cutoff,
            v_cutoff,
            self.config.max_intervals,
        )
    }
}

fn pair_index(h: u8, v: u8) -> usize {
    debug_assert!((CUTOFF_MIN..=CUTOFF_MAX).contains(&h));
    debug_assert!((CUTOFF_MIN..=CUTOFF_MAX).contains(&v));
    (h - CUTOFF_MIN) as usize * CUTOFF_COUNT + (v - CUTOFF_MIN) as usize
}

/// A deblocked grain plane synthesized on a flat field, used as the
/// statistical reference for both calibration and gain-matched refinement.
fn reference_mosaic(
    db: &GrainPatternDatabase,
    h_cutoff: i32,
    v_cutoff: i32,
    scaling: i32,
    log2_scale: u8,
    frame_index: u32,
) -> SignedPlane {
    let flat = Frame::new(REF_WIDTH, REF_HEIGHT).expect("reference dimensions are even");
    let params = FilmGrainParams {
        cancel_flag: false,
        model_id: 0,
        blending_mode_id: 0,
        log2_scale_factor: log2_scale,
        comp_model_present: [true, false, false],
        intervals: [
            vec![IntensityInterval {
                lower_bound: 0,
                upper_bound: 255,
                scaling_value: scaling,
                h_cutoff,
                v_cutoff,
            }],
            Vec::new(),
            Vec::new(),
        ],
        persistence_flag: false,
    };
    let config = SynthesisConfig {
        master_seed: db.master_seed(),
        deblocking_enabled: true,
    };
    grain_plane(&flat, &params, db, frame_index, &config).expect("reference synthesis")
}

/// Adds the per-tile squared DCT magnitudes of every full 64x64 tile.
fn accumulate_power_spectrum(plane: &SignedPlane, spectrum: &mut [f64]) {
    let tiles_x = plane.width() / PATTERN_SIZE;
    let tiles_y = plane.height() / PATTERN_SIZE;
    let mut tile = SignedPlane::new(PATTERN_SIZE, PATTERN_SIZE);
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            for y in 0..PATTERN_SIZE {
                for x in 0..PATTERN_SIZE {
                    tile.set(x, y, plane.get(tx * PATTERN_SIZE + x, ty * PATTERN_SIZE + y));
                }
            }
            let coeffs = forward_dct64(&tile).expect("tile is 64x64");
            for (s, &c) in spectrum.iter_mut().zip(&coeffs) {
                *s += (c as f64) * (c as f64);
            }
        }
    }
}

fn mean_power_spectrum(plane: &SignedPlane) -> Vec<f64> {
    let tiles = (plane.width() / PATTERN_SIZE) * (plane.height() / PATTERN_SIZE);
    let mut spectrum = vec![0f64; PATTERN_SIZE * PATTERN_SIZE];
    accumulate_power_spectrum(plane, &mut spectrum);
    for v in spectrum.iter_mut() {
        *v /= tiles as f64;
    }
    spectrum
}

/// Cumulative, normalized marginal energy curves after subtracting the
/// white-noise floor estimated from the top corner of the spectrum.
fn curves_from_spectrum(spectrum: &[f64]) -> CurvePair {
    let mut floor = 0f64;
    for y in 48..PATTERN_SIZE {
        for x in 48..PATTERN_SIZE {
            floor += spectrum[y * PATTERN_SIZE + x];
        }
    }
    floor /= 256.0;

    let mut col = [0f64; CURVE_LEN];
    let mut row = [0f64; CURVE_LEN];
    for y in 0..PATTERN_SIZE {
        for x in 0..PATTERN_SIZE {
            if x == 0 && y == 0 {
                continue;
            }
            let s = spectrum[y * PATTERN_SIZE + x] - floor;
            if x < CURVE_LEN {
                col[x] += s;
            }
            if y < CURVE_LEN {
                row[y] += s;
            }
        }
    }
    for curve in [&mut col, &mut row] {
        let mut acc = 0f64;
        for v in curve.iter_mut() {
            acc += *v;
            *v = acc;
        }
        let total = curve[CURVE_LEN - 1];
        if total > 0.0 {
            for v in curve.iter_mut() {
                *v /= total;
            }
        }
    }
    CurvePair { col, row }
}

fn curve_distance(a: &CurvePair, b: &CurvePair) -> f64 {
    let mut d = 0f64;
    for i in 0..CURVE_LEN {
        d += (a.col[i] - b.col[i]).powi(2) + (a.row[i] - b.row[i]).powi(2);
    }
    d
}

/// Residual standard deviation of one 8x8 block (in-bounds samples only),
/// with Sheppard's correction for integer rounding noise.
fn block_sd(residual: &SignedPlane, x0: usize, y0: usize) -> f64 {
    let x1 = (x0 + GRAIN_BLOCK).min(residual.width());
    let y1 = (y0 + GRAIN_BLOCK).min(residual.height());
    let mut sum = 0i64;
    let mut sum_sq = 0i64;
    let mut n = 0i64;
    for y in y0..y1 {
        for x in x0..x1 {
            let v = residual.get(x, y) as i64;
            sum += v;
            sum_sq += v * v;
            n += 1;
        }
    }
    let nf = n as f64;
    let mean = sum as f64 / nf;
    let var = sum_sq as f64 / nf - mean * mean;
    (var - 1.0 / 12.0).max(0.0).sqrt()
}

/// Sum and count of per-block residual standard deviations.
fn block_sd_sum(residual: &SignedPlane) -> (f64, usize) {
    let blocks_x = residual.width().div_ceil(GRAIN_BLOCK);
    let blocks_y = residual.height().div_ceil(GRAIN_BLOCK);
    let mut sum = 0f64;
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            sum += block_sd(residual, bx * GRAIN_BLOCK, by * GRAIN_BLOCK);
        }
    }
    (sum, blocks_x * blocks_y)
}
