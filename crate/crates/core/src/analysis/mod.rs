//! Measurements over poisoned corpora: per-region DCT spectra, the scalar
//! CAA trigger statistic and its Mann-Whitney detector, high-frequency
//! ablation, recompression survival, and a STRIP-style entropy probe.

pub mod probe;

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use probe::{
    log_loss_and_gradient, probe_effect, probe_train, EffectReport, FeatureSpec, ProbeHyper,
    ProbeModel,
};

use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::jpeg;
use crate::masks::{MaskKind, RoiMask};
use crate::jpeg::ZIGZAG;
use crate::spectral::{fft2, ifft2, low_pass, Dct8, HighPassSpec, SpatialBlock};

/// First zigzag index of the "high-frequency" half of an 8x8 block.
pub const HF_BAND_START: usize = 32;

/// Per-region spectral summary of one image under a binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Mean coefficient magnitude by zigzag index, light (weight 1) region.
    pub light_magnitude: Vec<f64>,
    /// Same for the dark (weight 0) region.
    pub dark_magnitude: Vec<f64>,
    pub light_hf_energy: f64,
    pub dark_hf_energy: f64,
    /// light HF energy / dark HF energy; `f64::INFINITY` when the dark
    /// region carries none.
    pub hf_contrast: f64,
    /// Both regions empty of HF energy (e.g. a constant image).
    pub zero_energy: bool,
    pub hf_band_start: usize,
}

/// Block-DCT spectrum split by mask region, with the default HF band.
pub fn region_spectrum(img: &PlanarImage, mask: &RoiMask) -> Result<SpectrumReport> {
    region_spectrum_with_band(img, mask, HF_BAND_START)
}

/// As [`region_spectrum`], with a caller-chosen HF band start.
pub fn region_spectrum_with_band(
    img: &PlanarImage,
    mask: &RoiMask,
    hf_band_start: usize,
) -> Result<SpectrumReport> {
    if mask.width() != img.width() || mask.height() != img.height() {
        return Err(Error::ShapeMismatch(
            img.width(),
            img.height(),
            mask.width(),
            mask.height(),
        ));
    }
    let luma = img.luma();
    let (w, h) = (img.width(), img.height());
    let (bx, by) = (w / 8, h / 8);
    if bx == 0 || by == 0 {
        return Err(Error::ImageTooSmall(w, h, 8));
    }

    let dct = Dct8::new();
    let mut mag = [vec![0.0; 64], vec![0.0; 64]]; // dark, light
    let mut energy = [0.0f64; 2];
    let mut counts = [0usize; 2];

    for b_y in 0..by {
        for b_x in 0..bx {
            let mut weight = 0.0;
            let mut spatial = [0.0; 64];
            for y in 0..8 {
                for x in 0..8 {
                    let (px, py) = (b_x * 8 + x, b_y * 8 + y);
                    weight += mask.get(px, py);
                    spatial[y * 8 + x] = luma[py * w + px] * 255.0 - 128.0;
                }
            }
            weight /= 64.0;
            if weight > 0.1 && weight < 0.9 {
                return Err(Error::NonBinaryMask(weight));
            }
            let region = usize::from(weight >= 0.5);
            counts[region] += 1;
            let freq = dct.forward(&SpatialBlock(spatial));
            for zz in 0..64 {
                let c = freq.0[ZIGZAG[zz]];
                mag[region][zz] += c.abs();
                if zz >= hf_band_start {
                    energy[region] += c * c;
                }
            }
        }
    }

    for region in 0..2 {
        if counts[region] > 0 {
            let inv = 1.0 / counts[region] as f64;
            for v in &mut mag[region] {
                *v *= inv;
            }
            energy[region] *= inv;
        }
    }

    let zero_energy = energy[0] == 0.0 && energy[1] == 0.0;
    let hf_contrast = if energy[0] == 0.0 {
        f64::INFINITY
    } else {
        energy[1] / energy[0]
    };
    Ok(SpectrumReport {
        dark_magnitude: mag[0].clone(),
        light_magnitude: mag[1].clone(),
        light_hf_energy: energy[1],
        dark_hf_energy: energy[0],
        hf_contrast,
        zero_energy,
        hf_band_start,
    })
}

/// Scalar trigger statistic: `ln` of the HF contrast between the mask
/// family's light and dark regions. Positive values mean the image carries
/// the family's frequency layout; flipping the family's phase negates it.
pub fn caa_statistic(img: &PlanarImage, family: &MaskKind) -> Result<f64> {
    if !family.is_fixed_binary() {
        return Err(Error::InvalidConfig(alloc::string::String::from(
            "the trigger statistic needs a fixed binary mask family",
        )));
    }
    let mask = family.build(img.width(), img.height())?;
    let report = region_spectrum(img, &mask)?;
    if report.zero_energy {
        return Err(Error::ZeroEnergy);
    }
    Ok(libm::log(report.light_hf_energy) - libm::log(report.dark_hf_energy))
}

/// Exact tie-corrected Mann-Whitney AUC: the probability that a positive
/// outranks a negative, with ties counted half.
pub fn mann_whitney_auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&v| (v, true))
        .chain(neg.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("statistics are never NaN"));

    let mut rank_sum_pos = 0.0;
    let mut i = 0usize;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // average rank over the tie group, 1-based ranks
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for item in &all[i..=j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let np = pos.len() as f64;
    let nn = neg.len() as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    Ok(u / (np * nn))
}

/// AUC of the CAA statistic between a poisoned and a benign corpus.
pub fn detector_auc(
    pos: &[PlanarImage],
    neg: &[PlanarImage],
    family: &MaskKind,
) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pos_stats = pos
        .iter()
        .map(|img| caa_statistic(img, family))
        .collect::<Result<Vec<_>>>()?;
    let neg_stats = neg
        .iter()
        .map(|img| caa_statistic(img, family))
        .collect::<Result<Vec<_>>>()?;
    mann_whitney_auc(&pos_stats, &neg_stats)
}

/// Removes everything above the normalized radius `t` (the complement of
/// the high-pass truncation) and clamps back to `[0,1]`.
pub fn hf_ablation(img: &PlanarImage, spec: HighPassSpec) -> Result<PlanarImage> {
    let mut out = ifft2(&low_pass(&fft2(img)?, spec));
    out.clamp_unit();
    Ok(out)
}

/// Re-encodes both corpora with the plain encoder at each quality and
/// reports the detector AUC after each recompression.
pub fn recompress_survival(
    pos: &[PlanarImage],
    neg: &[PlanarImage],
    family: &MaskKind,
    qualities: &[u32],
) -> Result<Vec<(u32, f64)>> {
    let recompress = |corpus: &[PlanarImage], quality: u32| -> Result<Vec<PlanarImage>> {
        corpus
            .iter()
            .map(|img| jpeg::decode(&jpeg::encode(img, quality)?))
            .collect()
    };
    let mut out = Vec::with_capacity(qualities.len());
    for &q in qualities {
        let rp = recompress(pos, q)?;
        let rn = recompress(neg, q)?;
        out.push((q, detector_auc(&rp, &rn, family)?));
    }
    Ok(out)
}

/// Average prediction entropy of the probe over seeded 50/50 pixel blends
/// of `img` with pool images (the STRIP test statistic).
pub fn strip_entropy(
    img: &PlanarImage,
    clean_pool: &[PlanarImage],
    model: &ProbeModel,
    n_blend: usize,
    seed: u64,
) -> Result<f64> {
    if clean_pool.is_empty() || n_blend == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..n_blend {
        let other = &clean_pool[rng.gen_range(0..clean_pool.len())];
        if !img.same_shape(other) {
            return Err(Error::ShapeMismatch(
                img.width(),
                img.height(),
                other.width(),
                other.height(),
            ));
        }
        let planes = img
            .planes()
            .iter()
            .zip(other.planes())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * x + 0.5 * y).collect())
            .collect();
        let blend = PlanarImage::from_planes(img.width(), img.height(), planes)?;
        let p = model.predict_proba(&blend)?;
        total += entropy(&p);
    }
    Ok(total / n_blend as f64)
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * libm::log(v))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg::{encode_roi, RoiCodecConfig};
    use crate::synth;

    fn checker() -> MaskKind {
        MaskKind::Checkerboard {
            cells_x: 8,
            cells_y: 8,
            phase: 0,
        }
    }

    fn caa_image(seed: u64) -> PlanarImage {
        let img = synth::photo_like(seed, 64, 64);
        let mask = checker().build(64, 64).unwrap();
        jpeg::decode(&encode_roi(&img, &mask, &RoiCodecConfig::default()).unwrap()).unwrap()
    }

    fn benign_image(seed: u64) -> PlanarImage {
        let img = synth::photo_like(seed, 64, 64);
        jpeg::decode(&jpeg::encode(&img, 75).unwrap()).unwrap()
    }

    #[test]
    fn uniform_compression_is_region_symmetric() {
        let mut contrasts = Vec::new();
        for seed in 0..20 {
            let img = benign_image(seed);
            let mask = checker().build(64, 64).unwrap();
            let report = region_spectrum(&img, &mask).unwrap();
            contrasts.push(report.hf_contrast);
        }
        let mean: f64 = contrasts.iter().sum::<f64>() / contrasts.len() as f64;
        assert!((mean - 1.0).abs() < 0.1, "mean contrast {mean}");
    }

    #[test]
    fn caa_compression_shifts_the_contrast() {
        for seed in 0..10 {
            let img = caa_image(seed);
            let mask = checker().build(64, 64).unwrap();
            let report = region_spectrum(&img, &mask).unwrap();
            assert!(report.hf_contrast > 1.5, "contrast {}", report.hf_contrast);
        }
    }

    #[test]
    fn constant_images_have_no_spectrum_to_compare() {
        let img = PlanarImage::constant(64, 64, 3, 0.5);
        let mask = checker().build(64, 64).unwrap();
        let report = region_spectrum(&img, &mask).unwrap();
        assert!(report.zero_energy);
        assert_eq!(report.hf_contrast, f64::INFINITY);
        assert!(matches!(
            caa_statistic(&img, &checker()),
            Err(Error::ZeroEnergy)
        ));
    }

    #[test]
    fn region_spectrum_rejects_soft_masks() {
        let img = synth::photo_like(3, 64, 64);
        let soft = RoiMask::uniform(64, 64, 0.5).unwrap();
        assert!(matches!(
            region_spectrum(&img, &soft),
            Err(Error::NonBinaryMask(_))
        ));
    }

    #[test]
    fn statistic_negates_under_phase_flip() {
        let img = caa_image(33);
        let a = caa_statistic(&img, &checker()).unwrap();
        let b = caa_statistic(&img, &checker().phase_flipped()).unwrap();
        assert!((a + b).abs() < 1e-6, "{a} vs {b}");
        assert!(a > 0.0);
    }

    #[test]
    fn auc_of_identical_corpora_is_half() {
        let vals = [0.3, 1.2, -0.5, 0.0, 2.0];
        assert_eq!(mann_whitney_auc(&vals, &vals).unwrap(), 0.5);

        let imgs: Vec<PlanarImage> = (0..5).map(benign_image).collect();
        let auc = detector_auc(&imgs, &imgs, &checker()).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn auc_of_separated_values_is_one() {
        let pos = [5.0, 6.0, 7.0];
        let neg = [1.0, 2.0, 3.0];
        assert_eq!(mann_whitney_auc(&pos, &neg).unwrap(), 1.0);
        assert_eq!(mann_whitney_auc(&neg, &pos).unwrap(), 0.0);
        assert!(mann_whitney_auc(&[], &neg).is_err());
    }

    #[test]
    fn auc_handles_ties_by_halving() {
        let pos = [1.0, 2.0];
        let neg = [1.0, 0.0];
        // pairs: (1 vs 1) tie 0.5, (1 vs 0) win, (2 vs 1) win, (2 vs 0) win
        assert_eq!(mann_whitney_auc(&pos, &neg).unwrap(), 3.5 / 4.0);
    }

    #[test]
    fn detector_separates_small_corpora() {
        let pos: Vec<PlanarImage> = (0..12).map(caa_image).collect();
        let neg: Vec<PlanarImage> = (100..112).map(benign_image).collect();
        let auc = detector_auc(&pos, &neg, &checker()).unwrap();
        assert!(auc >= 0.95, "AUC {auc}");
    }

    #[test]
    fn ablation_near_one_barely_changes_the_image() {
        let img = synth::photo_like(9, 64, 64);
        let out = hf_ablation(&img, HighPassSpec::new(0.999).unwrap()).unwrap();
        let psnr = crate::metrics::psnr(&img, &out).unwrap();
        assert!(psnr > 45.0, "PSNR {psnr}");
    }

    #[test]
    fn ablation_is_idempotent() {
        let img = synth::photo_like(10, 32, 32);
        let spec = HighPassSpec::new(0.5).unwrap();
        let once = hf_ablation(&img, spec).unwrap();
        let twice = hf_ablation(&once, spec).unwrap();
        for c in 0..3 {
            for (a, b) in once.plane(c).iter().zip(twice.plane(c)) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn ablation_suppresses_the_caa_statistic() {
        let img = caa_image(77);
        let before = caa_statistic(&img, &checker()).unwrap();
        let after_img = hf_ablation(&img, HighPassSpec::new(0.5).unwrap()).unwrap();
        let after = caa_statistic(&after_img, &checker()).unwrap();
        assert!(after < before, "before {before}, after {after}");
        assert!(after < 0.5 * before, "drop is too small: {before} -> {after}");
    }

    #[test]
    fn entropy_of_uniform_distribution_is_log_n() {
        let p = [0.1; 10];
        assert!((entropy(&p) - (10.0f64).ln()).abs() < 1e-12);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }
}
