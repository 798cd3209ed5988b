//! Baseline JFIF encoder with per-block bit allocation.
//!
//! The ROI never changes the emitted tables or syntax. A block of weight `w`
//! gets multiplier `k = 1 + round((1-w)(k_max-1))`; each AC coefficient with
//! table step `s` is stored as the level `k * round(c / (k s))`, a multiple
//! of `k` that any stock decoder dequantizes with `s` alone. Zero-weight
//! blocks additionally drop a trailing run of zigzag coefficients. DC is
//! always quantized at `k = 1` so block means survive everywhere.

use alloc::vec;
use alloc::vec::Vec;

use super::bits::BitWriter;
use super::huffman::{category, magnitude_bits, HuffEncoder};
use super::tables::{self, QuantTable, ZIGZAG};
use super::{BlockRoi, JpegStream, RoiCodecConfig};
use crate::error::{Error, Result};
use crate::image::{pad_to_block, quantize_u8, PlanarImage};
use crate::masks::RoiMask;
use crate::spectral::{Dct8, SpatialBlock};

/// Per-block quantization policy derived from the ROI.
#[derive(Clone, Copy)]
struct BlockPolicy {
    k: u8,
    /// Zigzag index from which AC levels are forced to zero (64 = none).
    zero_from: usize,
}

const UNIFORM: BlockPolicy = BlockPolicy {
    k: 1,
    zero_from: 64,
};

/// Plain baseline encode; no ROI is consulted anywhere on this path.
pub fn encode(img: &PlanarImage, quality: u32) -> Result<JpegStream> {
    encode_impl(img, quality, None)
}

/// ROI-weighted encode.
pub fn encode_roi(img: &PlanarImage, mask: &RoiMask, cfg: &RoiCodecConfig) -> Result<JpegStream> {
    cfg.validate()?;
    if mask.width() != img.width() || mask.height() != img.height() {
        return Err(Error::ShapeMismatch(
            img.width(),
            img.height(),
            mask.width(),
            mask.height(),
        ));
    }
    let roi = BlockRoi::from_mask(mask);
    let zero_count = libm::ceil(cfg.hf_zero_fraction * 63.0) as usize;
    let policies: Vec<BlockPolicy> = roi
        .weights()
        .iter()
        .map(|&w| BlockPolicy {
            k: 1 + libm::round((1.0 - w) * (cfg.k_max - 1) as f64) as u8,
            zero_from: if w == 0.0 { 64 - zero_count } else { 64 },
        })
        .collect();
    encode_impl(img, cfg.quality, Some(&policies))
}

fn encode_impl(
    img: &PlanarImage,
    quality: u32,
    policies: Option<&[BlockPolicy]>,
) -> Result<JpegStream> {
    if img.channels() != 3 {
        return Err(Error::ChannelCount {
            expected: 3,
            got: img.channels(),
        });
    }
    if img.width() == 0 || img.height() == 0 || img.width() > 0xFFFF || img.height() > 0xFFFF {
        return Err(Error::ShapeMismatch(img.width(), img.height(), 1, 0xFFFF));
    }
    let (luma_q, chroma_q) = tables::quant_table(quality)?;

    let padded = pad_to_block(img, 8);
    let (pw, ph) = (padded.width(), padded.height());
    let (blocks_x, blocks_y) = (pw / 8, ph / 8);
    if let Some(p) = policies {
        debug_assert_eq!(p.len(), blocks_x * blocks_y);
    }

    // 8-bit RGB -> full-range YCbCr on the 0..255 scale
    let n = pw * ph;
    let mut ycc = [vec![0.0f64; n], vec![0.0f64; n], vec![0.0f64; n]];
    for i in 0..n {
        let r = quantize_u8(padded.plane(0)[i]) as f64;
        let g = quantize_u8(padded.plane(1)[i]) as f64;
        let b = quantize_u8(padded.plane(2)[i]) as f64;
        ycc[0][i] = 0.299 * r + 0.587 * g + 0.114 * b;
        ycc[1][i] = 128.0 - 0.168_735_892 * r - 0.331_264_108 * g + 0.5 * b;
        ycc[2][i] = 128.0 + 0.5 * r - 0.418_687_589 * g - 0.081_312_411 * b;
    }

    let mut out = Vec::with_capacity(n / 2 + 1024);
    write_headers(&mut out, img.width(), img.height(), &luma_q, &chroma_q);

    let dct = Dct8::new();
    let enc_luma_dc = HuffEncoder::new(&tables::LUMA_DC);
    let enc_luma_ac = HuffEncoder::new(&tables::LUMA_AC);
    let enc_chroma_dc = HuffEncoder::new(&tables::CHROMA_DC);
    let enc_chroma_ac = HuffEncoder::new(&tables::CHROMA_AC);

    let mut writer = BitWriter::new(&mut out);
    let mut pred = [0i32; 3];
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            let policy = policies
                .map(|p| p[by * blocks_x + bx])
                .unwrap_or(UNIFORM);
            for comp in 0..3 {
                let table = if comp == 0 { &luma_q } else { &chroma_q };
                let levels = quantize_block(
                    &dct,
                    &ycc[comp],
                    pw,
                    bx * 8,
                    by * 8,
                    table,
                    policy,
                );
                let (dc_enc, ac_enc) = if comp == 0 {
                    (&enc_luma_dc, &enc_luma_ac)
                } else {
                    (&enc_chroma_dc, &enc_chroma_ac)
                };
                write_block(&mut writer, &levels, &mut pred[comp], dc_enc, ac_enc);
            }
        }
    }
    writer.finish();
    out.extend_from_slice(&[0xFF, 0xD9]);

    Ok(JpegStream::new(out, Some(quality as u8), img.width(), img.height()))
}

/// Quantized levels of one block, in zigzag order.
fn quantize_block(
    dct: &Dct8,
    plane: &[f64],
    stride: usize,
    x0: usize,
    y0: usize,
    table: &QuantTable,
    policy: BlockPolicy,
) -> [i32; 64] {
    let mut spatial = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            spatial[y * 8 + x] = plane[(y0 + y) * stride + x0 + x] - 128.0;
        }
    }
    let freq = dct.forward(&SpatialBlock(spatial));

    let k = policy.k as i32;
    let mut levels = [0i32; 64];
    levels[0] = libm::round(freq.0[0] / table[0] as f64) as i32;
    for zz in 1..64 {
        if zz >= policy.zero_from {
            continue;
        }
        let raster = ZIGZAG[zz];
        let step = k as f64 * table[raster] as f64;
        let mut level = k * libm::round(freq.0[raster] / step) as i32;
        // |coef| can just reach 1024; baseline AC categories stop at 1023
        if level.abs() > 1023 {
            level = level.signum() * ((1023 / k) * k);
        }
        levels[zz] = level;
    }
    levels
}

fn write_block(
    w: &mut BitWriter,
    levels: &[i32; 64],
    pred: &mut i32,
    dc_enc: &HuffEncoder,
    ac_enc: &HuffEncoder,
) {
    let diff = levels[0] - *pred;
    *pred = levels[0];
    let cat = category(diff);
    dc_enc.emit(w, cat as u8);
    if cat > 0 {
        w.put(magnitude_bits(diff, cat), cat);
    }

    let last = (1..64).rev().find(|&i| levels[i] != 0);
    let Some(last) = last else {
        ac_enc.emit(w, 0x00); // EOB right away
        return;
    };
    let mut run = 0u32;
    for &level in &levels[1..=last] {
        if level == 0 {
            run += 1;
            continue;
        }
        while run >= 16 {
            ac_enc.emit(w, 0xF0); // ZRL
            run -= 16;
        }
        let cat = category(level);
        ac_enc.emit(w, ((run as u8) << 4) | cat as u8);
        w.put(magnitude_bits(level, cat), cat);
        run = 0;
    }
    if last != 63 {
        ac_enc.emit(w, 0x00);
    }
}

fn push_segment(out: &mut Vec<u8>, marker: u8, payload: &[u8]) {
    out.extend_from_slice(&[0xFF, marker]);
    let len = (payload.len() + 2) as u16;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(payload);
}

fn write_headers(out: &mut Vec<u8>, width: usize, height: usize, luma_q: &QuantTable, chroma_q: &QuantTable) {
    out.extend_from_slice(&[0xFF, 0xD8]); // SOI

    // APP0: JFIF 1.01, no density units, 1x1 aspect, no thumbnail
    let mut app0 = Vec::with_capacity(14);
    app0.extend_from_slice(b"JFIF\0");
    app0.extend_from_slice(&[0x01, 0x01, 0x00, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00]);
    push_segment(out, 0xE0, &app0);

    for (id, table) in [(0u8, luma_q), (1u8, chroma_q)] {
        let mut dqt = Vec::with_capacity(65);
        dqt.push(id); // Pq = 0 (8-bit), Tq = id
        for zz in 0..64 {
            dqt.push(table[ZIGZAG[zz]] as u8);
        }
        push_segment(out, 0xDB, &dqt);
    }

    let mut sof = Vec::with_capacity(15);
    sof.push(8); // precision
    sof.extend_from_slice(&(height as u16).to_be_bytes());
    sof.extend_from_slice(&(width as u16).to_be_bytes());
    sof.push(3);
    for (id, tq) in [(1u8, 0u8), (2, 1), (3, 1)] {
        sof.extend_from_slice(&[id, 0x11, tq]); // 4:4:4 sampling
    }
    push_segment(out, 0xC0, &sof);

    for (class, id, spec) in [
        (0u8, 0u8, &tables::LUMA_DC),
        (1, 0, &tables::LUMA_AC),
        (0, 1, &tables::CHROMA_DC),
        (1, 1, &tables::CHROMA_AC),
    ] {
        let mut dht = Vec::with_capacity(17 + spec.vals.len());
        dht.push((class << 4) | id);
        dht.extend_from_slice(&spec.bits);
        dht.extend_from_slice(spec.vals);
        push_segment(out, 0xC4, &dht);
    }

    let mut sos = Vec::with_capacity(10);
    sos.push(3);
    for (id, tables) in [(1u8, 0x00u8), (2, 0x11), (3, 0x11)] {
        sos.extend_from_slice(&[id, tables]);
    }
    sos.extend_from_slice(&[0, 63, 0]); // full spectral selection, no approximation
    push_segment(out, 0xDA, &sos);
}
