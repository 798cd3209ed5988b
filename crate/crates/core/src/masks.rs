//! ROI mask generators: the sample-specific residual and frequency masks
//! used to reactivate triggers, the fixed repetitive masks that drive the
//! compression-adapted attack, and the pairing rule that hands a poisoned
//! sample's mask to each benign sample.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::spectral::{fft2, high_pass, ifft2, HighPassSpec};

/// Per-pixel bitrate-allocation weights in `[0,1]`. Higher weight means
/// more bits and less distortion for that region.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiMask {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RoiMask {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(width, height, data.len(), 1));
        }
        if let Some(&bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::MaskRange(bad));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constant mask. Level 1.0 is the codec no-op.
    pub fn uniform(width: usize, height: usize, level: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::MaskRange(level));
        }
        Ok(Self {
            width,
            height,
            data: vec![level; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// 8-bit gray rendition (`round(255 w)`), for PGM export and inspection.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&w| libm::round(255.0 * w) as u8)
            .collect()
    }
}

/// The mask families the pipeline knows how to build.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum MaskKind {
    /// Sample-specific: normalized channel-mean |x - x_p|.
    Residual,
    /// Sample-specific: normalized magnitude of the high-passed poisoned image.
    Frequency { t: f64 },
    /// Alternating cells; phase 0 puts weight 1 in the top-left cell.
    Checkerboard {
        cells_x: usize,
        cells_y: usize,
        phase: u8,
    },
    /// Square rings by Chebyshev distance; phase sets the outermost band.
    ConcentricSquares { rings: usize, phase: u8 },
    Uniform { level: f64 },
}

impl MaskKind {
    /// Checkerboard with the 8x8 cell layout used by default for CAA.
    pub fn default_caa() -> Self {
        MaskKind::Checkerboard {
            cells_x: 8,
            cells_y: 8,
            phase: 0,
        }
    }

    /// True for the fixed binary families usable as CAA masks.
    pub fn is_fixed_binary(&self) -> bool {
        matches!(
            self,
            MaskKind::Checkerboard { .. } | MaskKind::ConcentricSquares { .. }
        )
    }

    /// Builds a fixed mask of this kind for the given dimensions.
    /// Sample-specific kinds have no fixed geometry and are rejected.
    pub fn build(&self, width: usize, height: usize) -> Result<RoiMask> {
        match *self {
            MaskKind::Checkerboard {
                cells_x,
                cells_y,
                phase,
            } => mask_checkerboard(width, height, cells_x, cells_y, phase),
            MaskKind::ConcentricSquares { rings, phase } => {
                mask_concentric(width, height, rings, phase)
            }
            MaskKind::Uniform { level } => RoiMask::uniform(width, height, level),
            MaskKind::Residual | MaskKind::Frequency { .. } => Err(Error::InvalidConfig(
                alloc::string::String::from("residual/frequency masks are sample-specific"),
            )),
        }
    }

    /// The same mask with inverted polarity, where that makes sense.
    pub fn phase_flipped(&self) -> Self {
        match *self {
            MaskKind::Checkerboard {
                cells_x,
                cells_y,
                phase,
            } => MaskKind::Checkerboard {
                cells_x,
                cells_y,
                phase: 1 - phase,
            },
            MaskKind::ConcentricSquares { rings, phase } => MaskKind::ConcentricSquares {
                rings,
                phase: 1 - phase,
            },
            ref other => other.clone(),
        }
    }
}

/// Affine rescale of an arbitrary finite map to `[0,1]`. A constant map has
/// no contrast to stretch and becomes the neutral 0.5 mask.
pub fn norm(width: usize, height: usize, z: &[f64]) -> Result<RoiMask> {
    if z.len() != width * height {
        return Err(Error::ShapeMismatch(width, height, z.len(), 1));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let min = z.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let data = if max == min {
        vec![0.5; z.len()]
    } else {
        // direct division makes the endpoints exactly 0 and 1
        let range = max - min;
        z.iter().map(|&v| (v - min) / range).collect()
    };
    RoiMask::new(width, height, data)
}

/// Residual mask: normalized channel-mean absolute difference between a
/// sample and its poisoned version.
pub fn mask_res(x: &PlanarImage, x_p: &PlanarImage) -> Result<RoiMask> {
    if !x.same_shape(x_p) {
        return Err(Error::ShapeMismatch(
            x.width(),
            x.height(),
            x_p.width(),
            x_p.height(),
        ));
    }
    let n = x.width() * x.height();
    let mut acc = vec![0.0; n];
    for c in 0..x.channels() {
        for (a, (&u, &v)) in acc.iter_mut().zip(x.plane(c).iter().zip(x_p.plane(c))) {
            *a += (u - v).abs();
        }
    }
    let inv = 1.0 / x.channels() as f64;
    for a in &mut acc {
        *a *= inv;
    }
    norm(x.width(), x.height(), &acc)
}

/// Frequency mask: normalized channel-mean magnitude of the high-passed
/// poisoned image, abs taken before the channel mean. Non-power-of-two
/// inputs are zero-padded for the transform and cropped back.
pub fn mask_freq(x_p: &PlanarImage, spec: HighPassSpec) -> Result<RoiMask> {
    let (w, h) = (x_p.width(), x_p.height());
    let padded;
    let input = if w.is_power_of_two() && h.is_power_of_two() {
        x_p
    } else {
        let pw = w.next_power_of_two();
        let ph = h.next_power_of_two();
        let planes = x_p
            .planes()
            .iter()
            .map(|p| {
                let mut out = vec![0.0; pw * ph];
                for y in 0..h {
                    out[y * pw..y * pw + w].copy_from_slice(&p[y * w..(y + 1) * w]);
                }
                out
            })
            .collect();
        padded = PlanarImage::from_planes(pw, ph, planes)?;
        &padded
    };
    let residue = ifft2(&high_pass(&fft2(input)?, spec));
    let n = w * h;
    let mut acc = vec![0.0; n];
    for c in 0..residue.channels() {
        let p = residue.plane(c);
        for y in 0..h {
            for x in 0..w {
                acc[y * w + x] += p[y * residue.width() + x].abs();
            }
        }
    }
    let inv = 1.0 / residue.channels() as f64;
    for a in &mut acc {
        *a *= inv;
    }
    norm(w, h, &acc)
}

/// Alternating 1/0 cells. Cells get ceil-sized tiles; the last row/column of
/// cells is truncated when the counts do not divide the dimensions.
pub fn mask_checkerboard(
    width: usize,
    height: usize,
    cells_x: usize,
    cells_y: usize,
    phase: u8,
) -> Result<RoiMask> {
    if cells_x == 0 || cells_y == 0 {
        return Err(Error::InvalidConfig(alloc::string::String::from(
            "checkerboard needs at least one cell per axis",
        )));
    }
    let cw = width.div_ceil(cells_x);
    let ch = height.div_ceil(cells_y);
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let cell = x / cw + y / ch + phase as usize;
            data.push(if cell % 2 == 0 { 1.0 } else { 0.0 });
        }
    }
    RoiMask::new(width, height, data)
}

/// Concentric square rings: equal-width Chebyshev-distance bands from the
/// image center, alternating 1/0, with `phase` choosing the outermost value.
pub fn mask_concentric(width: usize, height: usize, rings: usize, phase: u8) -> Result<RoiMask> {
    if rings == 0 {
        return Err(Error::InvalidConfig(alloc::string::String::from(
            "concentric mask needs at least one ring",
        )));
    }
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let limit = width.max(height) as f64 / 2.0;
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let d = (x as f64 - cx).abs().max((y as f64 - cy).abs());
            let band = (libm::floor(d * rings as f64 / limit) as usize).min(rings - 1);
            let outer_parity = (rings - 1 - band) % 2;
            let v = if outer_parity == 0 {
                phase as f64
            } else {
                1.0 - phase as f64
            };
            data.push(v);
        }
    }
    RoiMask::new(width, height, data)
}

/// Picks, for one benign sample, the poisoned-pool entry whose mask it will
/// reuse. The draw depends only on `seed`, so a fixed seed reproduces the
/// same pairing no matter how the batch is scheduled.
pub fn pair_benign_mask(pool_len: usize, seed: u64) -> Result<usize> {
    if pool_len == 0 {
        return Err(Error::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rng.gen_range(0..pool_len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::derive_seed;
    use proptest::prelude::*;

    #[test]
    fn norm_rescales_affinely() {
        let m = norm(4, 1, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        let expect = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in m.data().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_of_constant_map_is_half() {
        let m = norm(3, 2, &[0.7; 6]).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn norm_rejects_non_finite() {
        assert!(matches!(norm(2, 1, &[0.0, f64::NAN]), Err(Error::NonFinite)));
    }

    #[test]
    fn mask_res_degenerates_on_identical_inputs() {
        let x = PlanarImage::constant(8, 8, 3, 0.3);
        let m = mask_res(&x, &x).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn mask_res_localizes_single_pixel_change() {
        let x = PlanarImage::constant(8, 8, 3, 0.4);
        let mut xp = x.clone();
        xp.set_sample(1, 3, 7, 0.6); // +0.2 on one channel at (x=3, y=7)
        let m = mask_res(&x, &xp).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let expect = if (x, y) == (3, 7) { 1.0 } else { 0.0 };
                assert_eq!(m.get(x, y), expect);
            }
        }
    }

    #[test]
    fn mask_freq_degenerates_on_constant_images() {
        let x = PlanarImage::constant(16, 16, 3, 0.5);
        let m = mask_freq(&x, HighPassSpec::default()).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn mask_freq_highlights_textured_patch() {
        // smooth background with an 8x8 checkered texture patch at (16..24)^2
        let mut img = PlanarImage::constant(32, 32, 1, 0.5);
        for y in 16..24 {
            for x in 16..24 {
                img.set_sample(0, x, y, if (x + y) % 2 == 0 { 1.0 } else { 0.0 });
            }
        }
        let m = mask_freq(&img, HighPassSpec::default()).unwrap();
        let mut patch_mean = 0.0;
        let mut bg_mean = 0.0;
        let mut bg_n = 0;
        for y in 0..32 {
            for x in 0..32 {
                if (16..24).contains(&x) && (16..24).contains(&y) {
                    patch_mean += m.get(x, y);
                } else if !(12..28).contains(&x) && !(12..28).contains(&y) {
                    bg_mean += m.get(x, y);
                    bg_n += 1;
                }
            }
        }
        patch_mean /= 64.0;
        bg_mean /= bg_n as f64;
        assert!(
            patch_mean > 0.5 && bg_mean < 0.1,
            "patch {patch_mean}, background {bg_mean}"
        );
    }

    #[test]
    fn mask_freq_ignores_constant_offsets() {
        let mut img = crate::synth::photo_like(21, 32, 32);
        let m1 = mask_freq(&img, HighPassSpec::default()).unwrap();
        for c in 0..img.channels() {
            for v in img.plane_mut(c) {
                *v += 0.07;
            }
        }
        let m2 = mask_freq(&img, HighPassSpec::default()).unwrap();
        for (a, b) in m1.data().iter().zip(m2.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn checkerboard_quadrants() {
        let m = mask_checkerboard(64, 64, 2, 2, 0).unwrap();
        assert_eq!(m.get(0, 0), 1.0); // TL
        assert_eq!(m.get(63, 0), 0.0); // TR
        assert_eq!(m.get(0, 63), 0.0); // BL
        assert_eq!(m.get(63, 63), 1.0); // BR
    }

    #[test]
    fn checkerboard_half_ones_and_phase_flip() {
        let m0 = mask_checkerboard(64, 64, 8, 8, 0).unwrap();
        let ones = m0.data().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(ones, 64 * 64 / 2);
        let m1 = mask_checkerboard(64, 64, 8, 8, 1).unwrap();
        for (a, b) in m0.data().iter().zip(m1.data()) {
            assert_eq!(*a, 1.0 - *b);
        }
    }

    #[test]
    fn concentric_single_ring_is_constant_phase() {
        for phase in [0, 1] {
            let m = mask_concentric(16, 16, 1, phase).unwrap();
            assert!(m.data().iter().all(|&v| v == phase as f64));
        }
    }

    #[test]
    fn concentric_band_boundaries() {
        let m = mask_concentric(64, 64, 4, 0).unwrap();
        // walking right from the center crosses a boundary every 8 pixels
        let row = 31;
        let center_val = m.get(32, row);
        assert_eq!(m.get(39, row), center_val);
        assert_eq!(m.get(40, row), 1.0 - center_val);
        assert_eq!(m.get(47, row), 1.0 - center_val);
        assert_eq!(m.get(48, row), center_val);
        // outermost band value is the phase
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn concentric_is_flip_symmetric() {
        let m = mask_concentric(48, 32, 3, 1).unwrap();
        for y in 0..32 {
            for x in 0..48 {
                assert_eq!(m.get(x, y), m.get(47 - x, y));
                assert_eq!(m.get(x, y), m.get(x, 31 - y));
            }
        }
    }

    #[test]
    fn pairing_is_deterministic_and_covers_pool() {
        assert!(matches!(pair_benign_mask(0, 1), Err(Error::EmptyPool)));
        assert_eq!(pair_benign_mask(1, 99).unwrap(), 0);

        let a = pair_benign_mask(10, 1234).unwrap();
        let b = pair_benign_mask(10, 1234).unwrap();
        assert_eq!(a, b);

        // frequency test: 10^4 draws over a pool of 10, each within 10% +/- 2%
        let mut counts = [0usize; 10];
        for i in 0..10_000u64 {
            counts[pair_benign_mask(10, derive_seed(42, i)).unwrap()] += 1;
        }
        for &c in &counts {
            assert!((800..=1200).contains(&c), "counts {counts:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        // Every generated mask stays in [0,1]; binary families stay binary.
        #[test]
        fn prop_masks_stay_in_range(
            w in 1usize..40,
            h in 1usize..40,
            cx in 1usize..9,
            cy in 1usize..9,
            rings in 1usize..6,
            phase in 0u8..2,
            vals in proptest::collection::vec(-100.0f64..100.0, 1..64),
        ) {
            let cb = mask_checkerboard(w, h, cx, cy, phase).unwrap();
            prop_assert!(cb.data().iter().all(|&v| v == 0.0 || v == 1.0));
            let cs = mask_concentric(w, h, rings, phase).unwrap();
            prop_assert!(cs.data().iter().all(|&v| v == 0.0 || v == 1.0));
            let n = norm(vals.len(), 1, &vals).unwrap();
            prop_assert!(n.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        // Non-degenerate maps normalize to span exactly [0,1].
        #[test]
        fn prop_norm_spans_unit_interval(
            vals in proptest::collection::vec(-50.0f64..50.0, 2..128),
        ) {
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(max > min);
            let m = norm(vals.len(), 1, &vals).unwrap();
            let lo = m.data().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = m.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(lo, 0.0);
            prop_assert_eq!(hi, 1.0);
        }

        // A checkerboard and its phase flip partition the image.
        #[test]
        fn prop_checkerboard_phases_partition(
            w in 1usize..48,
            h in 1usize..48,
            cx in 1usize..9,
            cy in 1usize..9,
        ) {
            let m0 = mask_checkerboard(w, h, cx, cy, 0).unwrap();
            let m1 = mask_checkerboard(w, h, cx, cy, 1).unwrap();
            prop_assert!(m0.data().iter().zip(m1.data()).all(|(a, b)| a + b == 1.0));
        }

        // Sample-specific masks are bit-exact reproducible.
        #[test]
        fn prop_masks_reproducible(seed in 0u64..1000) {
            let x = crate::synth::photo_like(seed, 16, 16);
            let xp = crate::synth::photo_like(seed ^ 0xFF, 16, 16);
            let a = mask_res(&x, &xp).unwrap();
            let b = mask_res(&x, &xp).unwrap();
            prop_assert_eq!(a.data(), b.data());
            let f1 = mask_freq(&xp, HighPassSpec::default()).unwrap();
            let f2 = mask_freq(&xp, HighPassSpec::default()).unwrap();
            prop_assert_eq!(f1.data(), f2.data());
        }
    }
}
