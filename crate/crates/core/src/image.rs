//! Planar image representation, BT.601 color transforms, and padding.
//!
//! Samples are kept as `f64` in `[0,1]`; conversion to and from 8-bit
//! integers rounds half away from zero so every module quantizes the same
//! way.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// An image as 1 or 3 row-major planes of real samples in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    width: usize,
    height: usize,
    planes: Vec<Vec<f64>>,
}

impl PlanarImage {
    /// Builds an image from planes. Each plane must hold `width * height`
    /// samples; 1 or 3 planes are accepted.
    pub fn from_planes(width: usize, height: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        if planes.len() != 1 && planes.len() != 3 {
            return Err(Error::ChannelCount {
                expected: 3,
                got: planes.len(),
            });
        }
        for p in &planes {
            if p.len() != width * height {
                return Err(Error::ShapeMismatch(width, height, p.len(), 1));
            }
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    /// Constant-valued image.
    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            planes: vec![vec![value; width * height]; channels],
        }
    }

    /// Decodes interleaved 8-bit samples (RGB or grayscale) into unit-range planes.
    pub fn from_u8(width: usize, height: usize, channels: usize, data: &[u8]) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::ChannelCount {
                expected: 3,
                got: channels,
            });
        }
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(width, height, data.len(), channels));
        }
        let mut planes = vec![vec![0.0; width * height]; channels];
        for (i, px) in data.chunks_exact(channels).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                planes[c][i] = v as f64 / 255.0;
            }
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    /// Interleaved 8-bit samples, rounding half away from zero.
    pub fn to_u8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height * self.channels());
        for i in 0..self.width * self.height {
            for p in &self.planes {
                out.push(quantize_u8(p[i]));
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        &self.planes[c]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.planes[c]
    }

    pub fn planes(&self) -> &[Vec<f64>] {
        &self.planes
    }

    pub fn sample(&self, c: usize, x: usize, y: usize) -> f64 {
        self.planes[c][y * self.width + x]
    }

    pub fn set_sample(&mut self, c: usize, x: usize, y: usize, value: f64) {
        self.planes[c][y * self.width + x] = value;
    }

    /// Total sample count across planes.
    pub fn sample_count(&self) -> usize {
        self.width * self.height * self.channels()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channels() == other.channels()
    }

    /// Clamps every sample into `[0,1]` in place.
    pub fn clamp_unit(&mut self) {
        for p in &mut self.planes {
            for v in p {
                *v = v.clamp(0.0, 1.0);
            }
        }
    }

    /// The luma plane: plane 0 for grayscale, BT.601 luma for RGB.
    pub fn luma(&self) -> Vec<f64> {
        if self.channels() == 1 {
            return self.planes[0].clone();
        }
        let (r, g, b) = (&self.planes[0], &self.planes[1], &self.planes[2]);
        r.iter()
            .zip(g)
            .zip(b)
            .map(|((&r, &g), &b)| 0.299 * r + 0.587 * g + 0.114 * b)
            .collect()
    }

    /// Crops to the top-left `width` x `height` region.
    pub fn crop(&self, width: usize, height: usize) -> Result<Self> {
        if width > self.width || height > self.height {
            return Err(Error::ShapeMismatch(self.width, self.height, width, height));
        }
        let planes = self
            .planes
            .iter()
            .map(|p| {
                let mut out = Vec::with_capacity(width * height);
                for y in 0..height {
                    out.extend_from_slice(&p[y * self.width..y * self.width + width]);
                }
                out
            })
            .collect();
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    /// Bilinear resize. Endpoints map to endpoints, so an identity resize is exact.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Self {
        let sx = if width > 1 {
            (self.width - 1) as f64 / (width - 1) as f64
        } else {
            0.0
        };
        let sy = if height > 1 {
            (self.height - 1) as f64 / (height - 1) as f64
        } else {
            0.0
        };
        let planes = self
            .planes
            .iter()
            .map(|p| {
                let mut out = Vec::with_capacity(width * height);
                for y in 0..height {
                    let fy = y as f64 * sy;
                    let y0 = libm::floor(fy) as usize;
                    let y1 = (y0 + 1).min(self.height - 1);
                    let wy = fy - y0 as f64;
                    for x in 0..width {
                        let fx = x as f64 * sx;
                        let x0 = libm::floor(fx) as usize;
                        let x1 = (x0 + 1).min(self.width - 1);
                        let wx = fx - x0 as f64;
                        let top = p[y0 * self.width + x0] * (1.0 - wx) + p[y0 * self.width + x1] * wx;
                        let bot = p[y1 * self.width + x0] * (1.0 - wx) + p[y1 * self.width + x1] * wx;
                        out.push(top * (1.0 - wy) + bot * wy);
                    }
                }
                out
            })
            .collect();
        Self {
            width,
            height,
            planes,
        }
    }
}

/// Rounds a unit-range sample to its 8-bit code, half away from zero.
pub fn quantize_u8(v: f64) -> u8 {
    libm::round(v * 255.0).clamp(0.0, 255.0) as u8
}

/// Three-plane luma/chroma image with the same unit-range convention.
#[derive(Debug, Clone, PartialEq)]
pub struct YCbCrImage(PlanarImage);

impl YCbCrImage {
    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        self.0.plane(c)
    }

    pub fn as_planar(&self) -> &PlanarImage {
        &self.0
    }
}

/// Full-range BT.601 RGB -> YCbCr, clamped to `[0,1]`. Chroma is centered at 0.5.
pub fn rgb_to_ycbcr(img: &PlanarImage) -> Result<YCbCrImage> {
    if img.channels() != 3 {
        return Err(Error::ChannelCount {
            expected: 3,
            got: img.channels(),
        });
    }
    let n = img.width() * img.height();
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let mut y = Vec::with_capacity(n);
    let mut cb = Vec::with_capacity(n);
    let mut cr = Vec::with_capacity(n);
    for i in 0..n {
        let (rv, gv, bv) = (r[i], g[i], b[i]);
        y.push((0.299 * rv + 0.587 * gv + 0.114 * bv).clamp(0.0, 1.0));
        cb.push((0.5 - 0.168_735_892 * rv - 0.331_264_108 * gv + 0.5 * bv).clamp(0.0, 1.0));
        cr.push((0.5 + 0.5 * rv - 0.418_687_589 * gv - 0.081_312_411 * bv).clamp(0.0, 1.0));
    }
    Ok(YCbCrImage(PlanarImage {
        width: img.width(),
        height: img.height(),
        planes: vec![y, cb, cr],
    }))
}

/// Inverse full-range BT.601, clamped to `[0,1]`.
pub fn ycbcr_to_rgb(img: &YCbCrImage) -> PlanarImage {
    let n = img.width() * img.height();
    let (y, cb, cr) = (img.plane(0), img.plane(1), img.plane(2));
    let mut r = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        let (yv, cbv, crv) = (y[i], cb[i] - 0.5, cr[i] - 0.5);
        r.push((yv + 1.402 * crv).clamp(0.0, 1.0));
        g.push((yv - 0.344_136_286 * cbv - 0.714_136_286 * crv).clamp(0.0, 1.0));
        b.push((yv + 1.772 * cbv).clamp(0.0, 1.0));
    }
    PlanarImage {
        width: img.width(),
        height: img.height(),
        planes: vec![r, g, b],
    }
}

/// Pads to the next multiple of `block` on each side by edge replication.
/// Already-aligned images come back unchanged.
pub fn pad_to_block(img: &PlanarImage, block: usize) -> PlanarImage {
    let pw = img.width().div_ceil(block) * block;
    let ph = img.height().div_ceil(block) * block;
    if pw == img.width() && ph == img.height() {
        return img.clone();
    }
    let planes = img
        .planes
        .iter()
        .map(|p| {
            let mut out = Vec::with_capacity(pw * ph);
            for y in 0..ph {
                let sy = y.min(img.height() - 1);
                let row = &p[sy * img.width()..(sy + 1) * img.width()];
                out.extend_from_slice(row);
                let edge = row[img.width() - 1];
                out.extend(core::iter::repeat(edge).take(pw - img.width()));
            }
            out
        })
        .collect();
    PlanarImage {
        width: pw,
        height: ph,
        planes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rgb1(r: f64, g: f64, b: f64) -> PlanarImage {
        PlanarImage::from_planes(1, 1, vec![vec![r], vec![g], vec![b]]).unwrap()
    }

    #[test]
    fn black_and_white_map_to_neutral_chroma() {
        let y = rgb_to_ycbcr(&rgb1(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(y.plane(0)[0], 0.0);
        assert_eq!(y.plane(1)[0], 0.5);
        assert_eq!(y.plane(2)[0], 0.5);

        let y = rgb_to_ycbcr(&rgb1(1.0, 1.0, 1.0)).unwrap();
        assert!((y.plane(0)[0] - 1.0).abs() < 1e-12);
        assert!((y.plane(1)[0] - 0.5).abs() < 1e-12);
        assert!((y.plane(2)[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn neutral_chroma_maps_back_to_gray_corners() {
        let black = YCbCrImage(PlanarImage::from_planes(1, 1, vec![vec![0.0], vec![0.5], vec![0.5]]).unwrap());
        let rgb = ycbcr_to_rgb(&black);
        assert_eq!(rgb.plane(0)[0], 0.0);
        assert_eq!(rgb.plane(1)[0], 0.0);
        assert_eq!(rgb.plane(2)[0], 0.0);

        let white = YCbCrImage(PlanarImage::from_planes(1, 1, vec![vec![1.0], vec![0.5], vec![0.5]]).unwrap());
        let rgb = ycbcr_to_rgb(&white);
        for c in 0..3 {
            assert!((rgb.plane(c)[0] - 1.0).abs() < 1e-12);
        }
    }

    // Oracle: run one million random 8-bit triples through both transforms in
    // 8-bit form and check the per-sample error bound.
    #[test]
    fn roundtrip_within_two_codes_over_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0103);
        for _ in 0..1_000_000 {
            let px = [rng.gen::<u8>(), rng.gen::<u8>(), rng.gen::<u8>()];
            let img = PlanarImage::from_u8(1, 1, 3, &px).unwrap();
            let ycc = rgb_to_ycbcr(&img).unwrap();
            // 8-bit form: quantize the luma/chroma planes before inverting.
            let q = PlanarImage::from_u8(1, 1, 3, &ycc.as_planar().to_u8()).unwrap();
            let back = ycbcr_to_rgb(&YCbCrImage(q));
            let out = back.to_u8();
            for c in 0..3 {
                assert!(
                    (out[c] as i32 - px[c] as i32).abs() <= 2,
                    "triple {px:?} came back as {out:?}"
                );
            }
        }
    }

    #[test]
    fn rejects_wrong_channel_count() {
        let gray = PlanarImage::constant(4, 4, 1, 0.5);
        assert!(matches!(
            rgb_to_ycbcr(&gray),
            Err(Error::ChannelCount { got: 1, .. })
        ));
    }

    #[test]
    fn pad_is_identity_on_aligned_images() {
        let img = PlanarImage::constant(64, 64, 3, 0.25);
        let padded = pad_to_block(&img, 8);
        assert_eq!(padded, img);
        // idempotence
        assert_eq!(pad_to_block(&padded, 8), padded);
    }

    #[test]
    fn pad_replicates_edges() {
        let mut img = PlanarImage::constant(65, 63, 1, 0.0);
        for y in 0..63 {
            img.set_sample(0, 64, y, 0.75); // last column marker
        }
        let padded = pad_to_block(&img, 8);
        assert_eq!(padded.width(), 72);
        assert_eq!(padded.height(), 64);
        for x in 64..72 {
            assert_eq!(padded.sample(0, x, 10), 0.75);
        }
        // replicated bottom row matches row 62
        for x in 0..65 {
            assert_eq!(padded.sample(0, x, 63), img.sample(0, x, 62));
        }
    }

    #[test]
    fn pad_then_crop_restores_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let w = rng.gen_range(1..40);
            let h = rng.gen_range(1..40);
            let data: Vec<f64> = (0..w * h).map(|_| rng.gen()).collect();
            let img = PlanarImage::from_planes(w, h, vec![data]).unwrap();
            let restored = pad_to_block(&img, 8).crop(w, h).unwrap();
            assert_eq!(restored, img);
        }
    }

    #[test]
    fn u8_roundtrip_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<u8> = (0..3 * 16 * 16).map(|_| rng.gen()).collect();
        let img = PlanarImage::from_u8(16, 16, 3, &data).unwrap();
        assert_eq!(img.to_u8(), data);
    }

    #[test]
    fn resize_identity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..32 * 32).map(|_| rng.gen()).collect();
        let img = PlanarImage::from_planes(32, 32, vec![data]).unwrap();
        assert_eq!(img.resize_bilinear(32, 32), img);
    }

    #[test]
    fn resize_preserves_constants() {
        let img = PlanarImage::constant(32, 32, 3, 0.37);
        let up = img.resize_bilinear(64, 64);
        assert!(up.plane(1).iter().all(|&v| (v - 0.37).abs() < 1e-12));
    }
}
