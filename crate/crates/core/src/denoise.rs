//! Motion-compensated temporal pre-filtering.
//!
//! Each frame is filtered as a weighted average of itself and up to eight
//! motion-compensated predictors from neighbouring frames. Block motion is
//! found by exhaustive luma SSD search; predictor weights fall off
//! exponentially with the per-pixel block match error, so poorly matched
//! predictors contribute little.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{Frame, Plane};
use crate::num::round_f64;

/// Temporal filter configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    /// Frames considered on each side of the centre (up to 8 predictors).
    pub window_radius: usize,
    /// Motion block size in luma pixels.
    pub block_size: usize,
    /// Exhaustive search range in pixels around the collocated block.
    pub search_range: i32,
    /// Weight falloff parameter in sample-value units.
    pub strength_sigma: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            window_radius: 4,
            block_size: 16,
            search_range: 16,
            strength_sigma: 6.0,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.window_radius) {
            return Err(Error::Config(format!(
                "window_radius must be in [1, 4], got {}",
                self.window_radius
            )));
        }
        if self.block_size != 8 && self.block_size != 16 {
            return Err(Error::Config(format!(
                "block_size must be 8 or 16, got {}",
                self.block_size
            )));
        }
        if self.search_range < 1 {
            return Err(Error::Config(format!(
                "search_range must be at least 1, got {}",
                self.search_range
            )));
        }
        if self.strength_sigma <= 0.0 {
            return Err(Error::Config(format!(
                "strength_sigma must be positive, got {}",
                self.strength_sigma
            )));
        }
        Ok(())
    }
}

/// One block's motion vector and its summed squared difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionVector {
    pub dx: i32,
    pub dy: i32,
    pub cost: u64,
}

/// Per-block motion vectors in raster order, one entry per (possibly partial)
/// non-overlapping block.
#[derive(Debug, Clone)]
pub struct MotionField {
    block_size: usize,
    blocks_x: usize,
    blocks_y: usize,
    vectors: Vec<MotionVector>,
}

impl MotionField {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    pub fn get(&self, bx: usize, by: usize) -> MotionVector {
        self.vectors[by * self.blocks_x + bx]
    }

    pub fn vectors(&self) -> &[MotionVector] {
        &self.vectors
    }
}

fn block_ssd(
    current: &Plane,
    reference: &Plane,
    x0: usize,
    y0: usize,
    block_w: usize,
    block_h: usize,
    dx: i32,
    dy: i32,
    stop_at: u64,
) -> u64 {
    let mut ssd = 0u64;
    for row in 0..block_h {
        let y = (y0 + row) as i64;
        for col in 0..block_w {
            let x = (x0 + col) as i64;
            let c = current.get(x as usize, y as usize) as i64;
            let r = reference.get_clamped(x + dx as i64, y + dy as i64) as i64;
            let d = c - r;
            ssd += (d * d) as u64;
        }
        if ssd > stop_at {
            break;
        }
    }
    ssd
}

/// Exhaustive block motion search of `current` in `reference`. For each block
/// the winning vector minimizes SSD; ties prefer the smaller |dx|+|dy|, then
/// the earlier candidate in (dy, dx) scan order.
pub fn motion_search(
    current: &Frame,
    reference: &Frame,
    config: &DenoiseConfig,
) -> Result<MotionField> {
    current.check_same_geometry(reference)?;
    config.validate()?;
    let bs = config.block_size;
    let (w, h) = (current.width(), current.height());
    let blocks_x = w.div_ceil(bs);
    let blocks_y = h.div_ceil(bs);
    let range = config.search_range;

    let vectors: Vec<MotionVector> = (0..blocks_x * blocks_y)
        .into_par_iter()
        .map(|i| {
            let bx = i % blocks_x;
            let by = i / blocks_x;
            let x0 = bx * bs;
            let y0 = by * bs;
            let block_w = (w - x0).min(bs);
            let block_h = (h - y0).min(bs);
            let mut best = MotionVector {
                dx: 0,
                dy: 0,
                cost: u64::MAX,
            };
            let mut best_l1 = i32::MAX;
            for dy in -range..=range {
                for dx in -range..=range {
                    let stop_at = best.cost;
                    let cost =
                        block_ssd(&current.y, &reference.y, x0, y0, block_w, block_h, dx, dy, stop_at);
                    if cost > stop_at {
                        continue;
                    }
                    let l1 = dx.abs() + dy.abs();
                    if cost < best.cost || (cost == best.cost && l1 < best_l1) {
                        best = MotionVector { dx, dy, cost };
                        best_l1 = l1;
                    }
                }
            }
            best
        })
        .collect();

    Ok(MotionField {
        block_size: bs,
        blocks_x,
        blocks_y,
        vectors,
    })
}

/// Weighted temporal average of the centre frame and its motion-compensated
/// predictors. `motion` holds one field per window frame except the centre,
/// in window order. Chroma reuses halved luma vectors and per-block weights.
pub fn temporal_filter(
    window: &[Frame],
    center_index: usize,
    motion: &[MotionField],
    config: &DenoiseConfig,
) -> Result<Frame> {
    config.validate()?;
    if window.is_empty() {
        return Err(Error::Config("temporal filter window is empty".into()));
    }
    if center_index >= window.len() {
        return Err(Error::Config(format!(
            "center index {center_index} outside window of {} frames",
            window.len()
        )));
    }
    if motion.len() != window.len() - 1 {
        return Err(Error::Config(format!(
            "expected {} motion fields, got {}",
            window.len() - 1,
            motion.len()
        )));
    }
    let center = &window[center_index];
    for f in window {
        center.check_same_geometry(f)?;
    }

    let references: Vec<&Frame> = window
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != center_index)
        .map(|(_, f)| f)
        .collect();
    let bs = config.block_size;
    let (w, h) = (center.width(), center.height());
    let blocks_x = w.div_ceil(bs);
    let inv_two_sigma_sq = 1.0 / (2.0 * config.strength_sigma * config.strength_sigma);

    // Per-reference, per-block weights from the per-pixel match error.
    let weights: Vec<Vec<f64>> = motion
        .iter()
        .map(|field| {
            let mut per_block = Vec::with_capacity(field.blocks_x * field.blocks_y);
            for by in 0..field.blocks_y {
                for bx in 0..field.blocks_x {
                    let block_w = (w - bx * bs).min(bs);
                    let block_h = (h - by * bs).min(bs);
                    let pixels = (block_w * block_h) as f64;
                    let ssd_per_pixel = field.get(bx, by).cost as f64 / pixels;
                    per_block.push((-ssd_per_pixel * inv_two_sigma_sq).exp());
                }
            }
            per_block
        })
        .collect();

    let luma_rows: Vec<Vec<u8>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![0u8; w];
            let by = y / bs;
            for x in 0..w {
                let bx = x / bs;
                let block = by * blocks_x + bx;
                let mut num = center.y.get(x, y) as f64;
                let mut den = 1.0f64;
                for (r, reference) in references.iter().enumerate() {
                    let mv = motion[r].get(bx, by);
                    let p = reference
                        .y
                        .get_clamped(x as i64 + mv.dx as i64, y as i64 + mv.dy as i64);
                    let wgt = weights[r][block];
                    num += wgt * p as f64;
                    den += wgt;
                }
                row[x] = round_f64(num / den).clamp(0, 255) as u8;
            }
            row
        })
        .collect();

    let chroma_plane = |select: fn(&Frame) -> &Plane| -> Vec<Vec<u8>> {
        let cw = w / 2;
        let ch = h / 2;
        (0..ch)
            .into_par_iter()
            .map(|cy| {
                let mut row = vec![0u8; cw];
                let by = (2 * cy) / bs;
                for cx in 0..cw {
                    let bx = (2 * cx) / bs;
                    let block = by * blocks_x + bx;
                    let mut num = select(center).get(cx, cy) as f64;
                    let mut den = 1.0f64;
                    for (r, reference) in references.iter().enumerate() {
                        let mv = motion[r].get(bx, by);
                        let p = select(reference).get_clamped(
                            cx as i64 + (mv.dx / 2) as i64,
                            cy as i64 + (mv.dy / 2) as i64,
                        );
                        let wgt = weights[r][block];
                        num += wgt * p as f64;
                        den += wgt;
                    }
                    row[cx] = round_f64(num / den).clamp(0, 255) as u8;
                }
                row
            })
            .collect()
    };
    let cb_rows = chroma_plane(|f| &f.cb);
    let cr_rows = chroma_plane(|f| &f.cr);

    let mut out = center.clone();
    for (y, row) in luma_rows.iter().enumerate() {
        for (x, &v) in row.iter().enumerate() {
            out.y.set(x, y, v);
        }
    }
    for (y, row) in cb_rows.iter().enumerate() {
        for (x, &v) in row.iter().enumerate() {
            out.cb.set(x, y, v);
        }
    }
    for (y, row) in cr_rows.iter().enumerate() {
        for (x, &v) in row.iter().enumerate() {
            out.cr.set(x, y, v);
        }
    }
    Ok(out)
}

/// Runs motion search against every non-centre frame of the window and
/// filters the centre frame.
pub fn denoise_window(window: &[Frame], center_index: usize, config: &DenoiseConfig) -> Result<Frame> {
    if window.is_empty() {
        return Err(Error::Config("temporal filter window is empty".into()));
    }
    if center_index >= window.len() {
        return Err(Error::Config(format!(
            "center index {center_index} outside window of {} frames",
            window.len()
        )));
    }
    let center = &window[center_index];
    let motion: Vec<MotionField> = window
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != center_index)
        .map(|(_, reference)| motion_search(center, reference, config))
        .collect::<Result<_>>()?;
    temporal_filter(window, center_index, &motion, config)
}

/// Filters every frame of a sequence with a window truncated at the
/// sequence boundaries. Output frame count equals input count.
pub fn denoise_sequence(frames: &[Frame], config: &DenoiseConfig) -> Result<Vec<Frame>> {
    if frames.is_empty() {
        return Err(Error::Config("sequence is empty".into()));
    }
    config.validate()?;
    let n = frames.len();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let lo = t.saturating_sub(config.window_radius);
        let hi = (t + config.window_radius + 1).min(n);
        out.push(denoise_window(&frames[lo..hi], t - lo, config)?);
    }
    Ok(out)
}
