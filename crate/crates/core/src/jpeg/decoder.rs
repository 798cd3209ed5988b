//! Baseline JFIF decoder. Consumes nothing but the bytes: there is no side
//! channel for ROI information, mirroring a victim's stock decoder.

use alloc::vec;
use alloc::vec::Vec;

use super::bits::BitReader;
use super::huffman::{extend, HuffDecoder};
use super::tables::ZIGZAG;
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::spectral::{Dct8, FreqBlock};

/// Entropy-decoded (still quantized) coefficient blocks of one component.
pub struct ComponentCoeffs {
    /// Raster-order 8x8 blocks, row-major over the padded grid.
    pub blocks: Vec<[i32; 64]>,
    /// Dequantization table bound to this component by the frame header.
    pub quant: [u16; 64],
}

/// Everything the entropy decoder recovers before inverse transformation.
pub struct CoeffPlanes {
    pub width: usize,
    pub height: usize,
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub components: Vec<ComponentCoeffs>,
}

impl CoeffPlanes {
    /// Count of nonzero stored AC levels in one block of one component.
    pub fn nonzero_ac(&self, comp: usize, block: usize) -> usize {
        self.components[comp].blocks[block][1..]
            .iter()
            .filter(|&&v| v != 0)
            .count()
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u8(&mut self) -> Result<u8> {
        let b = *self.data.get(self.pos).ok_or(Error::Truncated)?;
        self.pos += 1;
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(((self.u8()? as u16) << 8) | self.u8()? as u16)
    }

    fn skip(&mut self, n: usize) -> Result<()> {
        if self.pos + n > self.data.len() {
            return Err(Error::Truncated);
        }
        self.pos += n;
        Ok(())
    }

    /// Next marker code, tolerating fill bytes.
    fn marker(&mut self) -> Result<u8> {
        if self.u8()? != 0xFF {
            return Err(Error::Malformed("expected marker"));
        }
        loop {
            let code = self.u8()?;
            if code != 0xFF {
                return Ok(code);
            }
        }
    }
}

#[derive(Clone, Copy)]
struct FrameComponent {
    id: u8,
    quant_id: u8,
    dc_table: u8,
    ac_table: u8,
}

/// Parses the stream down to quantized coefficient blocks.
pub fn decode_coefficients(bytes: &[u8]) -> Result<CoeffPlanes> {
    let mut r = Reader {
        data: bytes,
        pos: 0,
    };
    if r.marker()? != 0xD8 {
        return Err(Error::Malformed("missing SOI"));
    }

    let mut quant: [Option<[u16; 64]>; 4] = [None; 4];
    let mut dc_tables: [Option<HuffDecoder>; 4] = [None, None, None, None];
    let mut ac_tables: [Option<HuffDecoder>; 4] = [None, None, None, None];
    let mut frame: Option<(usize, usize, Vec<FrameComponent>)> = None;
    let mut restart_interval = 0usize;

    loop {
        let marker = r.marker()?;
        match marker {
            0xD9 => return Err(Error::Malformed("EOI before scan data")),
            0xC0 => {
                let len = r.u16()? as usize;
                if len < 8 {
                    return Err(Error::Malformed("short SOF segment"));
                }
                if r.u8()? != 8 {
                    return Err(Error::Unsupported("sample precision other than 8-bit"));
                }
                let height = r.u16()? as usize;
                let width = r.u16()? as usize;
                let ncomp = r.u8()? as usize;
                if ncomp != 1 && ncomp != 3 {
                    return Err(Error::Unsupported("component count"));
                }
                if width == 0 || height == 0 {
                    return Err(Error::Malformed("zero frame dimensions"));
                }
                let mut comps = Vec::with_capacity(ncomp);
                for _ in 0..ncomp {
                    let id = r.u8()?;
                    if r.u8()? != 0x11 {
                        return Err(Error::Unsupported("chroma subsampling"));
                    }
                    let quant_id = r.u8()?;
                    comps.push(FrameComponent {
                        id,
                        quant_id,
                        dc_table: 0,
                        ac_table: 0,
                    });
                }
                frame = Some((width, height, comps));
            }
            0xC2 => return Err(Error::Unsupported("progressive JPEG")),
            0xC9 | 0xCA | 0xCB => return Err(Error::Unsupported("arithmetic coding")),
            0xC1 | 0xC3 | 0xC5 | 0xC6 | 0xC7 | 0xCD | 0xCE | 0xCF => {
                return Err(Error::Unsupported("non-baseline frame type"))
            }
            0xDB => {
                let len = r.u16()? as usize;
                let mut remaining = len.checked_sub(2).ok_or(Error::Malformed("bad DQT length"))?;
                while remaining > 0 {
                    let pq_tq = r.u8()?;
                    if pq_tq >> 4 != 0 {
                        return Err(Error::Unsupported("16-bit quantization table"));
                    }
                    let id = (pq_tq & 0x0F) as usize;
                    if id > 3 {
                        return Err(Error::Malformed("quantization table id"));
                    }
                    let mut table = [0u16; 64];
                    for zz in 0..64 {
                        table[ZIGZAG[zz]] = r.u8()? as u16;
                    }
                    quant[id] = Some(table);
                    remaining = remaining
                        .checked_sub(65)
                        .ok_or(Error::Malformed("bad DQT length"))?;
                }
            }
            0xC4 => {
                let len = r.u16()? as usize;
                let mut remaining = len.checked_sub(2).ok_or(Error::Malformed("bad DHT length"))?;
                while remaining > 0 {
                    let tc_th = r.u8()?;
                    let class = tc_th >> 4;
                    let id = (tc_th & 0x0F) as usize;
                    if class > 1 || id > 3 {
                        return Err(Error::Malformed("Huffman table id"));
                    }
                    let mut bits = [0u8; 16];
                    for b in &mut bits {
                        *b = r.u8()?;
                    }
                    let count: usize = bits.iter().map(|&b| b as usize).sum();
                    let mut vals = vec![0u8; count];
                    for v in &mut vals {
                        *v = r.u8()?;
                    }
                    let table = HuffDecoder::new(&bits, &vals)?;
                    if class == 0 {
                        dc_tables[id] = Some(table);
                    } else {
                        ac_tables[id] = Some(table);
                    }
                    remaining = remaining
                        .checked_sub(17 + count)
                        .ok_or(Error::Malformed("bad DHT length"))?;
                }
            }
            0xDD => {
                let len = r.u16()?;
                if len != 4 {
                    return Err(Error::Malformed("bad DRI length"));
                }
                restart_interval = r.u16()? as usize;
            }
            0xDA => {
                let (width, height, mut comps) =
                    frame.take().ok_or(Error::Malformed("scan before frame header"))?;
                let _len = r.u16()?;
                let ns = r.u8()? as usize;
                if ns != comps.len() {
                    return Err(Error::Unsupported("partial or multi-pass scans"));
                }
                for _ in 0..ns {
                    let cs = r.u8()?;
                    let td_ta = r.u8()?;
                    let comp = comps
                        .iter_mut()
                        .find(|c| c.id == cs)
                        .ok_or(Error::Malformed("scan names unknown component"))?;
                    comp.dc_table = td_ta >> 4;
                    comp.ac_table = td_ta & 0x0F;
                }
                let ss = r.u8()?;
                let se = r.u8()?;
                let ah_al = r.u8()?;
                if (ss, se, ah_al) != (0, 63, 0) {
                    return Err(Error::Unsupported("spectral selection or approximation"));
                }
                return decode_scan(
                    bytes,
                    r.pos,
                    width,
                    height,
                    &comps,
                    &quant,
                    &dc_tables,
                    &ac_tables,
                    restart_interval,
                );
            }
            // APPn, COM and other skippable segments
            0xE0..=0xEF | 0xFE => {
                let len = r.u16()? as usize;
                r.skip(len.checked_sub(2).ok_or(Error::Malformed("bad segment length"))?)?;
            }
            0x01 | 0xD0..=0xD7 => {} // standalone markers, nothing to skip
            _ => {
                let len = r.u16()? as usize;
                r.skip(len.checked_sub(2).ok_or(Error::Malformed("bad segment length"))?)?;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn decode_scan(
    bytes: &[u8],
    scan_start: usize,
    width: usize,
    height: usize,
    comps: &[FrameComponent],
    quant: &[Option<[u16; 64]>; 4],
    dc_tables: &[Option<HuffDecoder>; 4],
    ac_tables: &[Option<HuffDecoder>; 4],
    restart_interval: usize,
) -> Result<CoeffPlanes> {
    let blocks_x = width.div_ceil(8);
    let blocks_y = height.div_ceil(8);
    let total = blocks_x * blocks_y;

    let mut components = Vec::with_capacity(comps.len());
    for c in comps {
        let table = quant[c.quant_id as usize].ok_or(Error::Malformed("missing quant table"))?;
        components.push(ComponentCoeffs {
            blocks: vec![[0i32; 64]; total],
            quant: table,
        });
    }

    let mut reader = BitReader::new(bytes, scan_start);
    let mut pred = vec![0i32; comps.len()];
    let mut restart_id = 0u8;

    for mcu in 0..total {
        if restart_interval > 0 && mcu > 0 && mcu % restart_interval == 0 {
            reader.consume_restart(0xD0 + restart_id)?;
            restart_id = (restart_id + 1) % 8;
            pred.iter_mut().for_each(|p| *p = 0);
        }
        for (ci, c) in comps.iter().enumerate() {
            let dc = dc_tables[c.dc_table as usize]
                .as_ref()
                .ok_or(Error::Malformed("missing DC Huffman table"))?;
            let ac = ac_tables[c.ac_table as usize]
                .as_ref()
                .ok_or(Error::Malformed("missing AC Huffman table"))?;
            let block = &mut components[ci].blocks[mcu];
            decode_block(&mut reader, dc, ac, &mut pred[ci], block)?;
        }
    }

    // the stream must close with EOI
    reader.align();
    let mut pos = reader.byte_pos();
    match reader.pending_marker() {
        Some(0xD9) => {}
        Some(_) => return Err(Error::Malformed("unexpected marker after scan")),
        None => loop {
            if pos + 1 >= bytes.len() {
                return Err(Error::Truncated);
            }
            if bytes[pos] == 0xFF && bytes[pos + 1] == 0xD9 {
                break;
            }
            if bytes[pos] == 0xFF && bytes[pos + 1] == 0x00 {
                pos += 2; // stray stuffed padding
                continue;
            }
            return Err(Error::Malformed("expected EOI"));
        },
    }

    Ok(CoeffPlanes {
        width,
        height,
        blocks_x,
        blocks_y,
        components,
    })
}

fn decode_block(
    r: &mut BitReader,
    dc: &HuffDecoder,
    ac: &HuffDecoder,
    pred: &mut i32,
    out: &mut [i32; 64],
) -> Result<()> {
    let cat = dc.decode(r)? as u32;
    if cat > 11 {
        return Err(Error::Malformed("DC category out of range"));
    }
    let diff = extend(r.bits(cat)?, cat);
    *pred += diff;
    out[0] = *pred;

    let mut zz = 1usize;
    while zz < 64 {
        let rs = ac.decode(r)?;
        let run = (rs >> 4) as usize;
        let cat = (rs & 0x0F) as u32;
        if cat == 0 {
            if run == 15 {
                zz += 16; // ZRL
                continue;
            }
            break; // EOB
        }
        zz += run;
        if zz > 63 {
            return Err(Error::Malformed("AC run overflows block"));
        }
        out[ZIGZAG[zz]] = extend(r.bits(cat)?, cat);
        zz += 1;
    }
    Ok(())
}

/// Full decode: entropy decode, dequantize, inverse DCT, color convert,
/// crop to the frame dimensions, clamp to `[0,1]`.
pub fn decode_bytes(bytes: &[u8]) -> Result<PlanarImage> {
    let coeffs = decode_coefficients(bytes)?;
    Ok(reconstruct(&coeffs))
}

/// Spatial reconstruction of entropy-decoded coefficients.
pub fn reconstruct(coeffs: &CoeffPlanes) -> PlanarImage {
    let dct = Dct8::new();
    let (pw, ph) = (coeffs.blocks_x * 8, coeffs.blocks_y * 8);
    let mut planes: Vec<Vec<f64>> = Vec::with_capacity(coeffs.components.len());
    for comp in &coeffs.components {
        let mut plane = vec![0.0f64; pw * ph];
        for by in 0..coeffs.blocks_y {
            for bx in 0..coeffs.blocks_x {
                let block = &comp.blocks[by * coeffs.blocks_x + bx];
                let mut freq = [0.0f64; 64];
                for i in 0..64 {
                    freq[i] = block[i] as f64 * comp.quant[i] as f64;
                }
                let spatial = dct.inverse(&FreqBlock(freq));
                for y in 0..8 {
                    for x in 0..8 {
                        let v = libm::round(spatial.0[y * 8 + x] + 128.0).clamp(0.0, 255.0);
                        plane[(by * 8 + y) * pw + bx * 8 + x] = v;
                    }
                }
            }
        }
        planes.push(plane);
    }

    let rgb: Vec<Vec<f64>> = if planes.len() == 3 {
        let mut r = vec![0.0; pw * ph];
        let mut g = vec![0.0; pw * ph];
        let mut b = vec![0.0; pw * ph];
        for i in 0..pw * ph {
            let y = planes[0][i];
            let cb = planes[1][i] - 128.0;
            let cr = planes[2][i] - 128.0;
            r[i] = libm::round(y + 1.402 * cr).clamp(0.0, 255.0) / 255.0;
            g[i] = libm::round(y - 0.344_136_286 * cb - 0.714_136_286 * cr).clamp(0.0, 255.0) / 255.0;
            b[i] = libm::round(y + 1.772 * cb).clamp(0.0, 255.0) / 255.0;
        }
        vec![r, g, b]
    } else {
        vec![planes.remove(0).iter().map(|v| v / 255.0).collect()]
    };

    PlanarImage::from_planes(pw, ph, rgb)
        .expect("reconstruction planes share one shape")
        .crop(coeffs.width, coeffs.height)
        .expect("frame dims fit the padded grid")
}
