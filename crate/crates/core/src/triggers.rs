//! Reference invisible triggers, implemented at the fidelity the poisoning
//! pipeline needs: a frequency-domain additive trigger, a smooth elastic
//! warp, and a visible corner patch as the stealth baseline.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::spectral::{dct2, idct2};

/// Additive perturbation at fixed positions of the full-image DCT. The same
/// offset is added to every channel, which shifts luma only.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FreqAdditive {
    /// (row frequency, column frequency) pairs.
    pub positions: Vec<(usize, usize)>,
    pub magnitude: f64,
}

impl FreqAdditive {
    /// Two mid/high-band positions at magnitude 30/255, scaled to the image.
    pub fn default_for(width: usize, height: usize) -> Self {
        Self {
            positions: vec![
                (2 * height / 3, 2 * width / 3),
                (5 * height / 6, 5 * width / 6),
            ],
            magnitude: 30.0 / 255.0,
        }
    }
}

/// Smooth displacement field from a seeded control grid, bicubically
/// upsampled and applied with bilinear sampling.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Warp {
    /// Control grid side length, at least 2.
    pub grid_k: usize,
    /// Peak displacement in pixels.
    pub strength: f64,
}

impl Default for Warp {
    fn default() -> Self {
        Self {
            grid_k: 4,
            strength: 1.0,
        }
    }
}

/// Corner for the patch trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

/// Constant square stamped into one corner on every channel.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Patch {
    pub size: usize,
    pub value: f64,
    pub corner: Corner,
}

impl Default for Patch {
    fn default() -> Self {
        Self {
            size: 3,
            value: 1.0,
            corner: Corner::BottomRight,
        }
    }
}

/// The trigger families the pipeline can apply.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum TriggerKind {
    FreqAdditive(FreqAdditive),
    Warp(Warp),
    Patch(Patch),
}

impl TriggerKind {
    /// Applies the trigger. `seed` only matters for the warp family.
    pub fn apply(&self, x: &PlanarImage, seed: u64) -> Result<PlanarImage> {
        match self {
            TriggerKind::FreqAdditive(cfg) => apply_freq_trigger(x, cfg),
            TriggerKind::Warp(cfg) => apply_warp_trigger(x, cfg, seed),
            TriggerKind::Patch(cfg) => apply_patch_trigger(x, cfg),
        }
    }
}

/// Adds `magnitude` at each configured position of the per-channel
/// orthonormal full-image DCT, then clamps to `[0,1]`.
pub fn apply_freq_trigger(x: &PlanarImage, cfg: &FreqAdditive) -> Result<PlanarImage> {
    let (w, h) = (x.width(), x.height());
    for &(u, v) in &cfg.positions {
        if u >= h || v >= w {
            return Err(Error::PositionOutOfBounds(u, v));
        }
    }
    if cfg.magnitude == 0.0 || cfg.positions.is_empty() {
        return Ok(x.clone());
    }
    let planes = x
        .planes()
        .iter()
        .map(|p| {
            let mut coeffs = dct2(p, w, h);
            for &(u, v) in &cfg.positions {
                coeffs[u * w + v] += cfg.magnitude;
            }
            idct2(&coeffs, w, h)
                .into_iter()
                .map(|v| v.clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    PlanarImage::from_planes(w, h, planes)
}

fn catmull_rom(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    0.5 * ((2.0 * p1)
        + (p2 - p0) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t * t)
}

/// Bicubic upsample of a k x k grid to `w x h`, endpoints aligned.
fn upsample_grid(grid: &[f64], k: usize, w: usize, h: usize) -> Vec<f64> {
    let at = |gx: isize, gy: isize| -> f64 {
        let gx = gx.clamp(0, k as isize - 1) as usize;
        let gy = gy.clamp(0, k as isize - 1) as usize;
        grid[gy * k + gx]
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let fy = if h > 1 {
            y as f64 * (k - 1) as f64 / (h - 1) as f64
        } else {
            0.0
        };
        let gy = libm::floor(fy) as isize;
        let ty = fy - gy as f64;
        for x in 0..w {
            let fx = if w > 1 {
                x as f64 * (k - 1) as f64 / (w - 1) as f64
            } else {
                0.0
            };
            let gx = libm::floor(fx) as isize;
            let tx = fx - gx as f64;
            let mut rows = [0.0; 4];
            for (i, row) in rows.iter_mut().enumerate() {
                let yy = gy + i as isize - 1;
                *row = catmull_rom(
                    at(gx - 1, yy),
                    at(gx, yy),
                    at(gx + 1, yy),
                    at(gx + 2, yy),
                    tx,
                );
            }
            out.push(catmull_rom(rows[0], rows[1], rows[2], rows[3], ty));
        }
    }
    out
}

fn bilinear(plane: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = libm::floor(x) as usize;
    let y0 = libm::floor(y) as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let tx = x - x0 as f64;
    let ty = y - y0 as f64;
    let top = plane[y0 * w + x0] * (1.0 - tx) + plane[y0 * w + x1] * tx;
    let bot = plane[y1 * w + x0] * (1.0 - tx) + plane[y1 * w + x1] * tx;
    top * (1.0 - ty) + bot * ty
}

/// Warps the image along a seeded smooth displacement field.
pub fn apply_warp_trigger(x: &PlanarImage, cfg: &Warp, seed: u64) -> Result<PlanarImage> {
    if cfg.grid_k < 2 {
        return Err(Error::InvalidConfig(alloc::string::String::from(
            "warp grid needs at least 2 control points per axis",
        )));
    }
    if cfg.strength < 0.0 {
        return Err(Error::InvalidConfig(alloc::string::String::from(
            "warp strength must be non-negative",
        )));
    }
    let (w, h) = (x.width(), x.height());
    let k = cfg.grid_k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gx = vec![0.0; k * k];
    let mut gy = vec![0.0; k * k];
    // sampled together so one seed fixes the whole field
    for i in 0..k * k {
        gx[i] = rng.gen_range(-1.0..=1.0);
        gy[i] = rng.gen_range(-1.0..=1.0);
    }
    let dx = upsample_grid(&gx, k, w, h);
    let dy = upsample_grid(&gy, k, w, h);

    let planes = x
        .planes()
        .iter()
        .map(|p| {
            let mut out = Vec::with_capacity(w * h);
            for y in 0..h {
                for xx in 0..w {
                    let sx = xx as f64 + cfg.strength * dx[y * w + xx];
                    let sy = y as f64 + cfg.strength * dy[y * w + xx];
                    out.push(bilinear(p, w, h, sx, sy));
                }
            }
            out
        })
        .collect();
    PlanarImage::from_planes(w, h, planes)
}

/// Stamps the patch. Applying it twice is the same as once.
pub fn apply_patch_trigger(x: &PlanarImage, cfg: &Patch) -> Result<PlanarImage> {
    let (w, h) = (x.width(), x.height());
    if cfg.size > w || cfg.size > h {
        return Err(Error::PatchTooLarge);
    }
    let (x0, y0) = match cfg.corner {
        Corner::TopLeft => (0, 0),
        Corner::TopRight => (w - cfg.size, 0),
        Corner::BottomLeft => (0, h - cfg.size),
        Corner::BottomRight => (w - cfg.size, h - cfg.size),
    };
    let mut out = x.clone();
    for c in 0..out.channels() {
        for y in y0..y0 + cfg.size {
            for xx in x0..x0 + cfg.size {
                out.set_sample(c, xx, y, cfg.value);
            }
        }
    }
    Ok(out)
}
