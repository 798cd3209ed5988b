//! Pixel-domain quality metrics: PSNR and SSIM.

use crate::error::{Error, Result};
use crate::image::PlanarImage;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01; // (K1 * L)^2 with L = 1
const SSIM_C2: f64 = 0.03 * 0.03;

/// Peak signal-to-noise ratio in dB over all samples of all planes.
/// Identical images return `f64::INFINITY`.
pub fn psnr(a: &PlanarImage, b: &PlanarImage) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    let mut acc = 0.0;
    for c in 0..a.channels() {
        for (&x, &y) in a.plane(c).iter().zip(b.plane(c)) {
            let d = x - y;
            acc += d * d;
        }
    }
    let mse = acc / a.sample_count() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * libm::log10(mse))
}

/// Mean SSIM on luma: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// unit dynamic range. Windows are evaluated at fully interior positions.
pub fn ssim(a: &PlanarImage, b: &PlanarImage) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::ImageTooSmall(a.width(), a.height(), SSIM_WINDOW));
    }
    let la = a.luma();
    let lb = b.luma();
    Ok(ssim_plane(&la, &lb, a.width(), a.height()))
}

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let dx = x as f64 - c;
            let dy = y as f64 - c;
            let v = libm::exp(-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
            w[y * SSIM_WINDOW + x] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

fn ssim_plane(a: &[f64], b: &[f64], width: usize, height: usize) -> f64 {
    let w = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for wy in 0..=height - SSIM_WINDOW {
        for wx in 0..=width - SSIM_WINDOW {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for y in 0..SSIM_WINDOW {
                let row = (wy + y) * width + wx;
                for x in 0..SSIM_WINDOW {
                    let g = w[y * SSIM_WINDOW + x];
                    let va = a[row + x];
                    let vb = b[row + x];
                    ma += g * va;
                    mb += g * vb;
                    saa += g * va * va;
                    sbb += g * vb * vb;
                    sab += g * va * vb;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
            total += num / den;
            count += 1;
        }
    }
    total / count as f64
}
