//! Spectral transforms: orthonormal 8x8 DCT blocks for the codec and the
//! per-region analysis, full-image DCT for frequency-domain triggers, and a
//! radix-2 FFT with centered layout plus ideal high-pass truncation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// 8x8 block of spatial samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialBlock(pub [f64; 64]);

/// 8x8 block of DCT coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqBlock(pub [f64; 64]);

/// Precomputed orthonormal DCT-II basis for 8-point transforms.
///
/// The forward transform of a constant block of value `v` has DC `8 v` and
/// zero AC, matching the JPEG convention for level-shifted samples.
pub struct Dct8 {
    // basis[u][x] = a_u cos((2x+1) u pi / 16)
    basis: [[f64; 8]; 8],
}

impl Default for Dct8 {
    fn default() -> Self {
        Self::new()
    }
}

impl Dct8 {
    pub fn new() -> Self {
        let mut basis = [[0.0; 8]; 8];
        for (u, row) in basis.iter_mut().enumerate() {
            let a = if u == 0 {
                libm::sqrt(1.0 / 8.0)
            } else {
                0.5
            };
            for (x, b) in row.iter_mut().enumerate() {
                *b = a * libm::cos(core::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / 16.0);
            }
        }
        Self { basis }
    }

    pub fn forward(&self, block: &SpatialBlock) -> FreqBlock {
        // rows then columns
        let mut tmp = [0.0; 64];
        for y in 0..8 {
            for u in 0..8 {
                let mut acc = 0.0;
                for x in 0..8 {
                    acc += self.basis[u][x] * block.0[y * 8 + x];
                }
                tmp[y * 8 + u] = acc;
            }
        }
        let mut out = [0.0; 64];
        for u in 0..8 {
            for v in 0..8 {
                let mut acc = 0.0;
                for y in 0..8 {
                    acc += self.basis[u][y] * tmp[y * 8 + v];
                }
                out[u * 8 + v] = acc;
            }
        }
        FreqBlock(out)
    }

    pub fn inverse(&self, block: &FreqBlock) -> SpatialBlock {
        let mut tmp = [0.0; 64];
        for u in 0..8 {
            for x in 0..8 {
                let mut acc = 0.0;
                for v in 0..8 {
                    acc += self.basis[v][x] * block.0[u * 8 + v];
                }
                tmp[u * 8 + x] = acc;
            }
        }
        let mut out = [0.0; 64];
        for y in 0..8 {
            for x in 0..8 {
                let mut acc = 0.0;
                for u in 0..8 {
                    acc += self.basis[u][y] * tmp[u * 8 + x];
                }
                out[y * 8 + x] = acc;
            }
        }
        SpatialBlock(out)
    }
}

/// Forward orthonormal 2D DCT of one 8x8 block.
pub fn dct2_8x8(block: &SpatialBlock) -> FreqBlock {
    Dct8::new().forward(block)
}

/// Inverse of [`dct2_8x8`].
pub fn idct2_8x8(block: &FreqBlock) -> SpatialBlock {
    Dct8::new().inverse(block)
}

fn dct_basis(n: usize) -> Vec<f64> {
    let mut basis = vec![0.0; n * n];
    for u in 0..n {
        let a = if u == 0 {
            libm::sqrt(1.0 / n as f64)
        } else {
            libm::sqrt(2.0 / n as f64)
        };
        for x in 0..n {
            basis[u * n + x] =
                a * libm::cos(core::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / (2 * n) as f64);
        }
    }
    basis
}

/// Full-plane orthonormal 2D DCT-II, row-major `height x width` output
/// indexed as `(u, v)` = (row frequency, column frequency).
pub fn dct2(plane: &[f64], width: usize, height: usize) -> Vec<f64> {
    let bw = dct_basis(width);
    let bh = dct_basis(height);
    // columns of the row transform
    let mut tmp = vec![0.0; width * height];
    for y in 0..height {
        for v in 0..width {
            let mut acc = 0.0;
            for x in 0..width {
                acc += bw[v * width + x] * plane[y * width + x];
            }
            tmp[y * width + v] = acc;
        }
    }
    let mut out = vec![0.0; width * height];
    for u in 0..height {
        for v in 0..width {
            let mut acc = 0.0;
            for y in 0..height {
                acc += bh[u * height + y] * tmp[y * width + v];
            }
            out[u * width + v] = acc;
        }
    }
    out
}

/// Inverse of [`dct2`].
pub fn idct2(coeffs: &[f64], width: usize, height: usize) -> Vec<f64> {
    let bw = dct_basis(width);
    let bh = dct_basis(height);
    let mut tmp = vec![0.0; width * height];
    for u in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for v in 0..width {
                acc += bw[v * width + x] * coeffs[u * width + v];
            }
            tmp[u * width + x] = acc;
        }
    }
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for u in 0..height {
                acc += bh[u * height + y] * tmp[u * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Complex value for the FFT path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Self = Self { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> f64 {
        libm::hypot(self.re, self.im)
    }
}

impl core::ops::Add for Complex {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl core::ops::Sub for Complex {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl core::ops::Mul for Complex {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

/// Radial high-pass cutoff as a fraction of the largest frequency radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighPassSpec {
    threshold: f64,
}

impl HighPassSpec {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidThreshold(threshold));
        }
        Ok(Self { threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Default for HighPassSpec {
    /// Keeps the outer three quarters of the radius as "high frequency".
    fn default() -> Self {
        Self { threshold: 0.25 }
    }
}

/// Centered (DC in the middle) per-channel 2D spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    width: usize,
    height: usize,
    planes: Vec<Vec<Complex>>,
}

impl Spectrum2D {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    pub fn plane(&self, c: usize) -> &[Complex] {
        &self.planes[c]
    }

    /// Total energy, summed over all channels and bins.
    pub fn energy(&self) -> f64 {
        self.planes
            .iter()
            .flat_map(|p| p.iter())
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Frequency radius of bin (x, y) relative to the DC bin.
    fn radius(&self, x: usize, y: usize) -> f64 {
        let fx = x as f64 - (self.width / 2) as f64;
        let fy = y as f64 - (self.height / 2) as f64;
        libm::hypot(fx, fy)
    }

    fn max_radius(&self) -> f64 {
        libm::hypot((self.width / 2) as f64, (self.height / 2) as f64)
    }
}

fn fft_inplace(buf: &mut [Complex], invert: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    // bit reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if invert { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * core::f64::consts::PI / len as f64;
        let wlen = Complex::new(libm::cos(ang), libm::sin(ang));
        for start in (0..n).step_by(len) {
            let mut w = Complex::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = buf[start + k];
                let v = buf[start + k + len / 2] * w;
                buf[start + k] = u + v;
                buf[start + k + len / 2] = u - v;
                w = w * wlen;
            }
        }
        len <<= 1;
    }
}

fn fft2_plane(plane: &mut [Complex], width: usize, height: usize, invert: bool) {
    for row in plane.chunks_exact_mut(width) {
        fft_inplace(row, invert);
    }
    let mut col = vec![Complex::ZERO; height];
    for x in 0..width {
        for y in 0..height {
            col[y] = plane[y * width + x];
        }
        fft_inplace(&mut col, invert);
        for y in 0..height {
            plane[y * width + x] = col[y];
        }
    }
}

// For even sizes the shift is an involution, so it doubles as the inverse.
fn shift_center(plane: &mut [Complex], width: usize, height: usize) {
    let (hw, hh) = (width / 2, height / 2);
    for y in 0..hh {
        for x in 0..width {
            let sx = (x + hw) % width;
            plane.swap(y * width + x, (y + hh) * width + sx);
        }
    }
}

/// Per-channel 2D DFT with centered layout. Dimensions must be powers of two.
pub fn fft2(img: &PlanarImage) -> Result<Spectrum2D> {
    let (w, h) = (img.width(), img.height());
    if !w.is_power_of_two() || !h.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(w, h));
    }
    let planes = img
        .planes()
        .iter()
        .map(|p| {
            let mut buf: Vec<Complex> = p.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft2_plane(&mut buf, w, h, false);
            shift_center(&mut buf, w, h);
            buf
        })
        .collect();
    Ok(Spectrum2D {
        width: w,
        height: h,
        planes,
    })
}

/// Real part of the inverse DFT. No clamping; callers take the magnitude or
/// clamp as their formula requires.
pub fn ifft2(spectrum: &Spectrum2D) -> PlanarImage {
    let (w, h) = (spectrum.width, spectrum.height);
    let scale = 1.0 / (w * h) as f64;
    let planes = spectrum
        .planes
        .iter()
        .map(|p| {
            let mut buf = p.clone();
            shift_center(&mut buf, w, h);
            fft2_plane(&mut buf, w, h, true);
            buf.iter().map(|c| c.re * scale).collect()
        })
        .collect();
    PlanarImage::from_planes(w, h, planes).expect("spectrum planes have matching shape")
}

/// Zeroes every coefficient with normalized radius `<= t`, realizing the
/// ideal truncation h_t. DC is always removed.
pub fn high_pass(spectrum: &Spectrum2D, spec: HighPassSpec) -> Spectrum2D {
    filter_radial(spectrum, spec, true)
}

/// Complement of [`high_pass`]: zeroes every coefficient with normalized
/// radius `> t`. Together the two partition the spectrum exactly.
pub fn low_pass(spectrum: &Spectrum2D, spec: HighPassSpec) -> Spectrum2D {
    filter_radial(spectrum, spec, false)
}

fn filter_radial(spectrum: &Spectrum2D, spec: HighPassSpec, keep_high: bool) -> Spectrum2D {
    let cutoff = spec.threshold() * spectrum.max_radius();
    let planes = spectrum
        .planes
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &c)| {
                    let (x, y) = (i % spectrum.width, i / spectrum.width);
                    let low = spectrum.radius(x, y) <= cutoff;
                    if low == keep_high {
                        Complex::ZERO
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect();
    Spectrum2D {
        width: spectrum.width,
        height: spectrum.height,
        planes,
    }
}
