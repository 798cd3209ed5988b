//! Deterministic procedural test images.
//!
//! Real photographic corpora are not always at hand, so the toolkit ships a
//! seeded generator producing textured, photograph-like images (multi-octave
//! value noise with correlated channels) and a labeled variant with
//! class-specific structure for training the probe. Identical seeds yield
//! bit-identical images on every platform.

use alloc::vec::Vec;

use crate::image::PlanarImage;
use crate::pipeline::mix;

fn lattice_value(seed: u64, octave: u64, channel: u64, i: u64, j: u64) -> f64 {
    let h = mix(seed ^ mix(octave.wrapping_mul(3) ^ mix(channel ^ mix(i ^ mix(j)))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn value_noise(seed: u64, channel: u64, w: usize, h: usize, cell: usize, out: &mut [f64], weight: f64) {
    let cell = cell.max(1);
    for y in 0..h {
        let gy = y / cell;
        let ty = smoothstep((y % cell) as f64 / cell as f64);
        for x in 0..w {
            let gx = x / cell;
            let tx = smoothstep((x % cell) as f64 / cell as f64);
            let v00 = lattice_value(seed, cell as u64, channel, gx as u64, gy as u64);
            let v10 = lattice_value(seed, cell as u64, channel, gx as u64 + 1, gy as u64);
            let v01 = lattice_value(seed, cell as u64, channel, gx as u64, gy as u64 + 1);
            let v11 = lattice_value(seed, cell as u64, channel, gx as u64 + 1, gy as u64 + 1);
            let top = v00 * (1.0 - tx) + v10 * tx;
            let bot = v01 * (1.0 - tx) + v11 * tx;
            out[y * w + x] += weight * (top * (1.0 - ty) + bot * ty);
        }
    }
}

/// A textured three-channel image: shared luminance octaves from coarse
/// structure down to pixel grain, plus a per-channel tint.
pub fn photo_like(seed: u64, width: usize, height: usize) -> PlanarImage {
    let n = width * height;
    let mut luma = alloc::vec![0.0; n];
    let mut total = 0.0;
    let mut cell = width.max(height) / 2;
    let mut weight = 1.0;
    while cell >= 1 {
        value_noise(seed, 0, width, height, cell, &mut luma, weight);
        total += weight;
        weight *= 0.55;
        if cell == 1 {
            break;
        }
        cell /= 2;
    }
    for v in &mut luma {
        *v /= total;
    }

    let mut planes = Vec::with_capacity(3);
    for c in 0..3u64 {
        let mut tint = alloc::vec![0.0; n];
        value_noise(seed ^ 0xA5A5, c + 1, width, height, width.max(height) / 3, &mut tint, 1.0);
        let plane = luma
            .iter()
            .zip(tint.iter())
            .map(|(&l, &t)| (0.15 + 0.7 * l + 0.3 * (t - 0.5)).clamp(0.0, 1.0))
            .collect();
        planes.push(plane);
    }
    PlanarImage::from_planes(width, height, planes).expect("generated planes share one shape")
}

/// A corpus of [`photo_like`] images with per-image derived seeds.
pub fn photo_corpus(seed: u64, count: usize, width: usize, height: usize) -> Vec<PlanarImage> {
    (0..count)
        .map(|i| photo_like(mix(seed ^ mix(i as u64)), width, height))
        .collect()
}

/// A labeled sample: class-specific oriented waves and color plus
/// photograph-like texture, distinctive enough for a linear probe.
pub fn class_sample(seed: u64, class: u32, index: u64, width: usize, height: usize) -> PlanarImage {
    let sample_seed = mix(seed ^ mix(class as u64) ^ mix(index.wrapping_add(0x51AB)));
    let mut img = photo_like(sample_seed, width, height);

    let angle = class as f64 * core::f64::consts::PI / 10.0;
    let freq = 2.0 + (class % 4) as f64;
    let phase = (mix(sample_seed) >> 11) as f64 / (1u64 << 53) as f64 * core::f64::consts::TAU;
    let (sin_a, cos_a) = (libm::sin(angle), libm::cos(angle));
    let base_shift = [
        0.12 * ((class % 3) as f64 - 1.0),
        0.12 * (((class / 3) % 3) as f64 - 1.0),
        0.12 * (((class / 5) % 2) as f64),
    ];
    for c in 0..3 {
        let plane = img.plane_mut(c);
        for y in 0..height {
            for x in 0..width {
                let u = x as f64 / width as f64;
                let v = y as f64 / height as f64;
                let wave = libm::sin(core::f64::consts::TAU * freq * (u * cos_a + v * sin_a) + phase);
                let p = &mut plane[y * width + x];
                *p = (*p * 0.55 + 0.25 + 0.18 * wave + base_shift[c]).clamp(0.0, 1.0);
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(photo_like(7, 32, 32), photo_like(7, 32, 32));
        assert_eq!(class_sample(1, 3, 9, 32, 32), class_sample(1, 3, 9, 32, 32));
        assert_ne!(photo_like(7, 32, 32), photo_like(8, 32, 32));
    }

    #[test]
    fn images_are_textured_and_in_range() {
        let img = photo_like(11, 64, 64);
        let p = img.plane(0);
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        let var = p.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / p.len() as f64;
        assert!(var > 1e-3, "flat image, variance {var}");
    }
}
