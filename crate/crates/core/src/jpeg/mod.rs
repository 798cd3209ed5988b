//! ROI-weighted baseline JFIF codec.
//!
//! The encoder takes a [`RoiMask`](crate::masks::RoiMask) and spends fewer
//! bits on low-weight 8x8 blocks; the decoder is a plain baseline decoder
//! with no ROI awareness at all, so every stream is readable by any
//! standards-conforming implementation. Fixed Annex-K Huffman tables, 4:4:4
//! sampling, single interleaved scan, no restart markers on the encode side.

mod bits;
mod decoder;
mod encoder;
mod huffman;
pub mod tables;

use alloc::vec::Vec;

pub use decoder::{decode_bytes, decode_coefficients, CoeffPlanes, ComponentCoeffs};
pub use tables::{quant_table, QuantTable, ZIGZAG};

use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::masks::RoiMask;

/// Encoder knobs beyond the IJG quality factor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoiCodecConfig {
    /// IJG-scale quality, 1..=100.
    pub quality: u32,
    /// Re-quantization multiplier applied to weight-0 blocks; weights in
    /// between interpolate linearly. Must be at least 1.
    pub k_max: u8,
    /// Fraction of the trailing zigzag AC coefficients zeroed in weight-0
    /// blocks, in [0,1].
    pub hf_zero_fraction: f64,
}

impl Default for RoiCodecConfig {
    fn default() -> Self {
        Self {
            quality: 75,
            k_max: 2,
            hf_zero_fraction: 0.5,
        }
    }
}

impl RoiCodecConfig {
    pub fn with_quality(quality: u32) -> Self {
        Self {
            quality,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=100).contains(&self.quality) {
            return Err(Error::InvalidQuality(self.quality));
        }
        if self.k_max < 1 {
            return Err(Error::InvalidConfig(alloc::string::String::from(
                "k_max must be at least 1",
            )));
        }
        if !(0.0..=1.0).contains(&self.hf_zero_fraction) {
            return Err(Error::InvalidConfig(alloc::string::String::from(
                "hf_zero_fraction must lie in [0,1]",
            )));
        }
        Ok(())
    }
}

/// Block-granularity reduction of a pixel mask: one weight per 8x8 block,
/// the mean of the (edge-replicated) mask tile under that block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRoi {
    blocks_x: usize,
    blocks_y: usize,
    weights: Vec<f64>,
}

impl BlockRoi {
    pub fn from_mask(mask: &RoiMask) -> Self {
        let blocks_x = mask.width().div_ceil(8);
        let blocks_y = mask.height().div_ceil(8);
        let mut weights = Vec::with_capacity(blocks_x * blocks_y);
        for by in 0..blocks_y {
            for bx in 0..blocks_x {
                let mut sum = 0.0;
                for dy in 0..8 {
                    let y = (by * 8 + dy).min(mask.height() - 1);
                    for dx in 0..8 {
                        let x = (bx * 8 + dx).min(mask.width() - 1);
                        sum += mask.get(x, y);
                    }
                }
                weights.push(sum / 64.0);
            }
        }
        Self {
            blocks_x,
            blocks_y,
            weights,
        }
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A JFIF byte stream plus the metadata the toolkit tracks for it.
#[derive(Debug, Clone, PartialEq)]
pub struct JpegStream {
    bytes: Vec<u8>,
    recorded_quality: Option<u8>,
    width: usize,
    height: usize,
}

/// Size accounting for one stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamStats {
    pub bytes: usize,
    pub bits_per_pixel: f64,
}

impl JpegStream {
    fn new(bytes: Vec<u8>, recorded_quality: Option<u8>, width: usize, height: usize) -> Self {
        debug_assert!(bytes.starts_with(&[0xFF, 0xD8]) && bytes.ends_with(&[0xFF, 0xD9]));
        Self {
            bytes,
            recorded_quality,
            width,
            height,
        }
    }

    /// Wraps foreign bytes, validating framing and reading dimensions from
    /// the frame header. The quality is unknown for foreign streams.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() < 4 || bytes[..2] != [0xFF, 0xD8] {
            return Err(Error::Malformed("missing SOI"));
        }
        if bytes[bytes.len() - 2..] != [0xFF, 0xD9] {
            return Err(Error::Truncated);
        }
        let coeffs = decode_coefficients(&bytes)?;
        Ok(Self {
            width: coeffs.width,
            height: coeffs.height,
            bytes,
            recorded_quality: None,
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn recorded_quality(&self) -> Option<u8> {
        self.recorded_quality
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Bitstream length in bits.
    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8
    }
}

/// Plain baseline encode at the given quality. The ROI machinery is not
/// consulted on this path.
pub fn encode(img: &PlanarImage, quality: u32) -> Result<JpegStream> {
    encoder::encode(img, quality)
}

/// ROI-weighted encode.
pub fn encode_roi(img: &PlanarImage, mask: &RoiMask, cfg: &RoiCodecConfig) -> Result<JpegStream> {
    encoder::encode_roi(img, mask, cfg)
}

/// Standard baseline decode of one of our streams.
pub fn decode(stream: &JpegStream) -> Result<PlanarImage> {
    decode_bytes(stream.bytes())
}

/// Byte count and bits per pixel relative to the frame dimensions.
pub fn stream_stats(stream: &JpegStream) -> StreamStats {
    StreamStats {
        bytes: stream.bytes.len(),
        bits_per_pixel: stream.bit_len() as f64 / (stream.width * stream.height) as f64,
    }
}
