//! Full-reference quality metrics and the relative-time delta.
//!
//! PSNR is capped at 100 dB so identical planes do not produce infinities.
//! MS-SSIM uses the standard five dyadic scales with exponents
//! (0.0448, 0.2856, 0.3001, 0.2363, 0.1333) and an 11x11 Gaussian window of
//! sigma 1.5; windows are clipped and renormalized at plane borders so all
//! five scales stay defined for the half-resolution chroma planes. Combined
//! YUV scores weight the planes (6, 1, 1)/8.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{Frame, Plane};

/// Per-plane scores plus the (6Y + U + V)/8 combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneScores {
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub yuv: f64,
}

const PSNR_CAP_DB: f64 = 100.0;
const PEAK: f64 = 255.0;

fn plane_mse(a: &Plane, b: &Plane) -> f64 {
    let mut sum = 0u64;
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        let d = x as i64 - y as i64;
        sum += (d * d) as u64;
    }
    sum as f64 / a.as_slice().len() as f64
}

fn mse_to_db(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Peak signal-to-noise ratio per plane, in dB.
pub fn psnr(reference: &Frame, test: &Frame) -> Result<PlaneScores> {
    reference.check_same_geometry(test)?;
    let y = mse_to_db(plane_mse(&reference.y, &test.y));
    let u = mse_to_db(plane_mse(&reference.cb, &test.cb));
    let v = mse_to_db(plane_mse(&reference.cr, &test.cr));
    Ok(PlaneScores {
        y,
        u,
        v,
        yuv: (6.0 * y + u + v) / 8.0,
    })
}

const MSSSIM_SCALES: usize = 5;
const MSSSIM_WEIGHTS: [f64; MSSSIM_SCALES] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const WINDOW_LEN: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
/// Luma must allow the window at the coarsest scale: 11 * 2^4.
const MSSSIM_MIN_LUMA: usize = WINDOW_LEN << (MSSSIM_SCALES - 1);

fn gaussian_window() -> [f64; WINDOW_LEN] {
    let mut w = [0f64; WINDOW_LEN];
    let mid = (WINDOW_LEN / 2) as f64;
    let mut sum = 0f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
        sum += *v;
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

struct Moments {
    mu_x: Vec<f64>,
    mu_y: Vec<f64>,
    xx: Vec<f64>,
    yy: Vec<f64>,
    xy: Vec<f64>,
}

/// Windowed first and second moments with border-clipped, renormalized
/// windows (separable passes).
fn windowed_moments(a: &[f64], b: &[f64], w: usize, h: usize) -> Moments {
    let kernel = gaussian_window();
    let half = WINDOW_LEN / 2;

    // Horizontal pass over five products.
    let mut hx = vec![0f64; w * h];
    let mut hy = vec![0f64; w * h];
    let mut hxx = vec![0f64; w * h];
    let mut hyy = vec![0f64; w * h];
    let mut hxy = vec![0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let k0 = half.saturating_sub(x);
            let k1 = WINDOW_LEN.min(w + half - x);
            let mut norm = 0f64;
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0f64, 0f64, 0f64, 0f64, 0f64);
            for k in k0..k1 {
                let px = x + k - half;
                let kv = kernel[k];
                let av = a[y * w + px];
                let bv = b[y * w + px];
                norm += kv;
                sx += kv * av;
                sy += kv * bv;
                sxx += kv * av * av;
                syy += kv * bv * bv;
                sxy += kv * av * bv;
            }
            let i = y * w + x;
            hx[i] = sx / norm;
            hy[i] = sy / norm;
            hxx[i] = sxx / norm;
            hyy[i] = syy / norm;
            hxy[i] = sxy / norm;
        }
    }

    // Vertical pass.
    let mut m = Moments {
        mu_x: vec![0f64; w * h],
        mu_y: vec![0f64; w * h],
        xx: vec![0f64; w * h],
        yy: vec![0f64; w * h],
        xy: vec![0f64; w * h],
    };
    for y in 0..h {
        let k0 = half.saturating_sub(y);
        let k1 = WINDOW_LEN.min(h + half - y);
        for x in 0..w {
            let mut norm = 0f64;
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0f64, 0f64, 0f64, 0f64, 0f64);
            for k in k0..k1 {
                let py = y + k - half;
                let kv = kernel[k];
                let i = py * w + x;
                norm += kv;
                sx += kv * hx[i];
                sy += kv * hy[i];
                sxx += kv * hxx[i];
                syy += kv * hyy[i];
                sxy += kv * hxy[i];
            }
            let i = y * w + x;
            m.mu_x[i] = sx / norm;
            m.mu_y[i] = sy / norm;
            m.xx[i] = sxx / norm;
            m.yy[i] = syy / norm;
            m.xy[i] = sxy / norm;
        }
    }
    m
}

/// Mean SSIM and mean contrast-structure term over one scale.
fn ssim_scale(a: &[f64], b: &[f64], w: usize, h: usize) -> (f64, f64) {
    let m = windowed_moments(a, b, w, h);
    let mut ssim_sum = 0f64;
    let mut cs_sum = 0f64;
    for i in 0..w * h {
        let mu_x = m.mu_x[i];
        let mu_y = m.mu_y[i];
        let var_x = (m.xx[i] - mu_x * mu_x).max(0.0);
        let var_y = (m.yy[i] - mu_y * mu_y).max(0.0);
        let cov = m.xy[i] - mu_x * mu_y;
        let luminance = (2.0 * mu_x * mu_y + C1) / (mu_x * mu_x + mu_y * mu_y + C1);
        let cs = (2.0 * cov + C2) / (var_x + var_y + C2);
        ssim_sum += luminance * cs;
        cs_sum += cs;
    }
    let n = (w * h) as f64;
    (ssim_sum / n, cs_sum / n)
}

fn downsample2(src: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let ow = w / 2;
    let oh = h / 2;
    let mut out = vec![0f64; ow * oh];
    for y in 0..oh {
        let y0 = 2 * y;
        let y1 = (y0 + 1).min(h - 1);
        for x in 0..ow {
            let x0 = 2 * x;
            let x1 = (x0 + 1).min(w - 1);
            out[y * ow + x] =
                (src[y0 * w + x0] + src[y0 * w + x1] + src[y1 * w + x0] + src[y1 * w + x1]) / 4.0;
        }
    }
    (out, ow, oh)
}

/// Per-scale (mean SSIM, mean contrast-structure) pairs for one plane across
/// the five dyadic scales.
pub fn msssim_plane_scales(a: &Plane, b: &Plane) -> Result<Vec<(f64, f64)>> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Geometry("plane dimensions differ".into()));
    }
    let mut va: Vec<f64> = a.as_slice().iter().map(|&v| v as f64).collect();
    let mut vb: Vec<f64> = b.as_slice().iter().map(|&v| v as f64).collect();
    let (mut w, mut h) = (a.width(), a.height());
    let mut scales = Vec::with_capacity(MSSSIM_SCALES);
    for scale in 0..MSSSIM_SCALES {
        scales.push(ssim_scale(&va, &vb, w, h));
        if scale + 1 < MSSSIM_SCALES {
            let (na, nw, nh) = downsample2(&va, w, h);
            let (nb, _, _) = downsample2(&vb, w, h);
            va = na;
            vb = nb;
            w = nw;
            h = nh;
        }
    }
    Ok(scales)
}

fn msssim_plane(a: &Plane, b: &Plane) -> Result<f64> {
    let scales = msssim_plane_scales(a, b)?;
    let mut score = 1f64;
    for (i, &(ssim, cs)) in scales.iter().enumerate() {
        let term = if i + 1 == MSSSIM_SCALES { ssim } else { cs };
        score *= term.max(0.0).powf(MSSSIM_WEIGHTS[i]);
    }
    Ok(score)
}

/// Multi-scale structural similarity per plane. Requires luma of at least
/// 176x176 so the 11x11 window fits all five dyadic scales.
pub fn ms_ssim(reference: &Frame, test: &Frame) -> Result<PlaneScores> {
    reference.check_same_geometry(test)?;
    if reference.width() < MSSSIM_MIN_LUMA || reference.height() < MSSSIM_MIN_LUMA {
        return Err(Error::Geometry(format!(
            "ms-ssim needs luma of at least {MSSSIM_MIN_LUMA}x{MSSSIM_MIN_LUMA}, got {}x{}",
            reference.width(),
            reference.height()
        )));
    }
    let y = msssim_plane(&reference.y, &test.y)?;
    let u = msssim_plane(&reference.cb, &test.cb)?;
    let v = msssim_plane(&reference.cr, &test.cr)?;
    Ok(PlaneScores {
        y,
        u,
        v,
        yuv: (6.0 * y + u + v) / 8.0,
    })
}

/// Relative time difference `sum_proposed / sum_default - 1`.
pub fn delta_t(sum_proposed: f64, sum_default: f64) -> Result<f64> {
    if sum_default <= 0.0 {
        return Err(Error::Config(format!(
            "default time sum must be positive, got {sum_default}"
        )));
    }
    Ok(sum_proposed / sum_default - 1.0)
}

/// High-frequency energy of the luma plane: squared 64-point DCT magnitudes
/// with horizontal or vertical index above 16, measured on the difference
/// between the plane and its 5x5 box-smoothed version, summed over all full
/// 64x64 tiles.
pub fn grain_band_energy(frame: &Frame) -> f64 {
    use crate::dct::forward_dct64;
    use crate::frame::SignedPlane;
    use crate::num::round_f64;

    let plane = &frame.y;
    let (w, h) = (plane.width(), plane.height());
    let mut highpass = SignedPlane::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let x0 = x.saturating_sub(2);
            let x1 = (x + 3).min(w);
            let y0 = y.saturating_sub(2);
            let y1 = (y + 3).min(h);
            let mut sum = 0i64;
            let mut count = 0i64;
            for yy in y0..y1 {
                for xx in x0..x1 {
                    sum += plane.get(xx, yy) as i64;
                    count += 1;
                }
            }
            let smooth = sum as f64 / count as f64;
            highpass.set(x, y, round_f64(plane.get(x, y) as f64 - smooth) as i32);
        }
    }

    let mut energy = 0f64;
    let mut tile = SignedPlane::new(64, 64);
    for ty in 0..h / 64 {
        for tx in 0..w / 64 {
            for y in 0..64 {
                for x in 0..64 {
                    tile.set(x, y, highpass.get(tx * 64 + x, ty * 64 + y));
                }
            }
            let coeffs = forward_dct64(&tile).expect("tile is 64x64");
            for y in 0..64 {
                for x in 0..64 {
                    if x > 16 || y > 16 {
                        let c = coeffs[y * 64 + x] as f64;
                        energy += c * c;
                    }
                }
            }
        }
    }
    energy
}
